void Brak_10ms(void)
{
    tBS req;
    tB enable;

    validateInputBool(&rtdb_req, &req, FALSE, FALSE);
    gh_brakeLightRequest = req.val;
    gh_operationalState = rtdb_state.val;
    gh_supplyVoltageLevel = rtdb_voltage.val;

    enable = FALSE;
    if ((gh_operationalState == NORMAL_OPERATION
         || gh_operationalState == EMERGENCY_STOP_LIMITED)
        && (gh_supplyVoltageLevel != VOLTAGE_LOW)
        && (gh_brakeLightRequest == TRUE)) {
        enable = TRUE;
    }

    gh_brakeLightEnabled = enable;
    rtdb_truck.val = enable;
    rtdb_truck.ss_U08 = SS_GOOD;
    rtdb_trailer.val = enable;
    rtdb_trailer.ss_U08 = SS_GOOD;
}
