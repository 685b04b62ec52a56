class A:
    x = 0
