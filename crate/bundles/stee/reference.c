void Stee_10ms(void)
{
    gh_primaryFailed = FALSE;
    if ((rtdb_primaryPressure.ss_U08 != SS_GOOD)
        || (rtdb_primaryPressure.val < PRESSURE_MIN)) {
        gh_primaryFailed = TRUE;
    }

    gh_backupActivated = FALSE;
    if ((gh_primaryFailed == TRUE) && (rtdb_engineRunning.val == TRUE)) {
        gh_backupActivated = TRUE;
    }

    rtdb_backupActive.val = gh_backupActivated;
    rtdb_backupActive.ss_U08 = SS_GOOD;
}
