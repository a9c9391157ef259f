#include <stdio.h>

int main(void) {
    int a[10];
    int n;
    if (scanf("%d", &n) != 1) return 1;
    for (int i = 0; i < 10; i++) a[i] = i;
    a[n] = 42;
    printf("%d\n", a[0]);
    return 0;
}
