typedef unsigned char       tB;
typedef unsigned char       tU08;

typedef struct {
    tB val;
    tU08 ss_U08;
} tBS;

typedef struct {
    tU08 val;
    tU08 ss_U08;
} tU08S;

#define TRUE                    1
#define FALSE                   0

#define SS_GOOD                 0U
#define SS_NOT_EXIST            1U
#define SS_NOT_GOOD             2U

#define NORMAL_OPERATION        0U
#define EMERGENCY_STOP_LIMITED  1U
#define OPERATIONAL_SHUTDOWN    2U

#define VOLTAGE_NORMAL          0U
#define VOLTAGE_LOW             1U

/*@
    assigns *outSig;
    ensures outSig->val == TRUE || outSig->val == FALSE;
*/
extern void validateInputBool(const tBS * const inSig,
                              tBS * const outSig,
                              tB defaultNotExist,
                              tB defaultNotGood);
