void F_10ms(void)
{
    readIn();
}
