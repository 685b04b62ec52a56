from a import *

class B(A):
    pass

print(B.x)
print(B().x)
