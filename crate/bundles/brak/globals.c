//Input variables
static tBS rtdb_req;
static tU08S rtdb_state;
static tU08S rtdb_voltage;

//Output variables
static tBS rtdb_truck;
static tBS rtdb_trailer;

//Concrete variables
tU08 gh_operationalState;
tU08 gh_supplyVoltageLevel;
tU08 gh_brakeLightEnabled;
tU08 gh_brakeLightRequest;
