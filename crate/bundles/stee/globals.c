//Input variables
static tU08S rtdb_primaryPressure;
static tBS rtdb_engineRunning;

//Output variables
static tBS rtdb_backupActive;

//Concrete variables
tU08 gh_primaryFailed;
tU08 gh_backupActivated;
