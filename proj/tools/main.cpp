#include <cstdio>

int main() {
  std::printf("smal CLI placeholder\n");
  return 0;
}
