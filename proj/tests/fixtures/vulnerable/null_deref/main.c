#include <stdio.h>

int main(void) {
    int n;
    int value = 7;
    int *p = &value;
    if (scanf("%d", &n) != 1) return 1;
    if (n == 0) p = NULL;
    printf("%d\n", *p);
    return 0;
}
