// Prints the library's points CSV for the tables named on the command line.
// Usage: points_ref LOWER_STEM TABLE...
#include <zslb/zslb.h>

#include <cstdio>
#include <vector>

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: points_ref LOWER_STEM TABLE...\n");
    return 2;
  }
  const char* lower[] = {argv[1]};
  std::vector<const char*> paths(argv + 2, argv + argc);
  char* csv = nullptr;
  if (zslb_points_from_csv(paths.data(), paths.size(), lower, 1, &csv) != ZSLB_OK) {
    std::fprintf(stderr, "%s\n", zslb_last_error());
    return 1;
  }
  std::fputs(csv, stdout);
  zslb_string_free(csv);
  return 0;
}
