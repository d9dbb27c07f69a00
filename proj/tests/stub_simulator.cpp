// Line-protocol simulator used by the tests: reads d reals per line and
// answers min(x1 - x2, x1 + x2).
//
//   stub_simulator                 well-behaved
//   stub_simulator garbage         answers with a non-number
//   stub_simulator exit-after K    exits with status 3 after K answers
//   stub_simulator nan             answers "nan"

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "ok";
  const long limit = mode == "exit-after" && argc > 2 ? std::atol(argv[2]) : -1;
  long answered = 0;
  std::string line;
  while (std::getline(std::cin, line)) {
    if (limit >= 0 && answered >= limit) return 3;
    std::istringstream in(line);
    std::vector<double> x;
    for (double v; in >> v;) x.push_back(v);
    if (x.size() < 2) return 4;
    if (mode == "garbage") {
      std::printf("not-a-number\n");
    } else if (mode == "nan") {
      std::printf("nan\n");
    } else {
      const double a = x[0] - x[1], b = x[0] + x[1];
      std::printf("%.17g\n", a < b ? a : b);
    }
    std::fflush(stdout);
    ++answered;
  }
  return 0;
}
