#include <iostream>

int main() {
    std::cout << "cvarsr placeholder\n";
    return 0;
}
