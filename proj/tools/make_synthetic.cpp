#include <iostream>

#include "CLI11.hpp"
#include "synthetic_case.hpp"

int main(int argc, char** argv) {
  ccopf::synthetic::Shape s;
  std::string out;
  CLI::App app{"Write a synthetic case file"};
  app.add_option("--buses", s.buses);
  app.add_option("--lines", s.lines);
  app.add_option("--generators", s.generators);
  app.add_option("--wind", s.wind);
  app.add_option("--seed", s.seed);
  app.add_option("--out", out)->required();
  CLI11_PARSE(app, argc, argv);
  try {
    ccopf::write_file(out, ccopf::write_case(ccopf::synthetic::make(s)));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
