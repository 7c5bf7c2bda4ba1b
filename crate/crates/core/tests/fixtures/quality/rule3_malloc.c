void F_10ms(void)
{
    p = malloc(4U);
}
