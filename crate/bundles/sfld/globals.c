//Input variables
static tU08S rtdb_oilLevel;

//Output variables
static tBS rtdb_oilWarning;

//Concrete variables
tU08 gh_oilLevelLow;
tU08 gh_lowOilCounter;
tU08 gh_warningActive;
