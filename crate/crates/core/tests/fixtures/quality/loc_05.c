void f(void)
{
    flag = 1U;
    writeOut(flag);
}
