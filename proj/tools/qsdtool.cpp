#include "qsd/qsd.hpp"
int main() { return 0; }
