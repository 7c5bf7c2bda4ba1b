void Sfld_10ms(void)
{
    tU08 level;

    level = rtdb_oilLevel.val;
    gh_oilLevelLow = FALSE;
    if ((rtdb_oilLevel.ss_U08 == SS_GOOD) && (level < OIL_LEVEL_MIN)) {
        gh_oilLevelLow = TRUE;
    }

    if (gh_oilLevelLow == TRUE) {
        if (gh_lowOilCounter < DEBOUNCE_LIMIT) {
            gh_lowOilCounter = gh_lowOilCounter + 1U;
        }
    } else {
        gh_lowOilCounter = 0U;
    }

    gh_warningActive = FALSE;
    if (gh_lowOilCounter >= DEBOUNCE_LIMIT) {
        gh_warningActive = TRUE;
    }

    rtdb_oilWarning.val = gh_warningActive;
    rtdb_oilWarning.ss_U08 = SS_GOOD;
}
