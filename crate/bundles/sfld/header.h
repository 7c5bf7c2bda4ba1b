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

#define OIL_LEVEL_MIN           10U
#define DEBOUNCE_LIMIT          200U
