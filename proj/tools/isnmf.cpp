#include "isnmf/isnmf.hpp"
int main(){ return 0; }
