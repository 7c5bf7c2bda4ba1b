void f(void)
{
    flag = 0U;
    flag = 1U;
    flag = 2U;
    flag = 3U;
    flag = 4U;
    flag = 5U;
    flag = 6U;
    flag = 7U;
    flag = 8U;
    flag = 9U;
}
