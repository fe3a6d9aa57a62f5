#include "nfsense/harmonics.hpp"

#include "nfsense/error.hpp"

namespace nfsense {

namespace {

struct Definition {
  int order;
  char const* name;
  bool uses_z_only;
  double (*eval)(double, double, double);
};

constexpr Definition kTerms[] = {
    {1, "x", false, [](double x, double, double) { return x; }},
    {1, "y", false, [](double, double y, double) { return y; }},
    {1, "z", true, [](double, double, double z) { return z; }},
    {2, "xy", false, [](double x, double y, double) { return x * y; }},
    {2, "zy", true, [](double, double y, double z) { return z * y; }},
    {2, "2z2-x2-y2", false, [](double x, double y, double z) { return 2 * z * z - x * x - y * y; }},
    {2, "zx", true, [](double x, double, double z) { return z * x; }},
    {2, "x2-y2", false, [](double x, double y, double) { return x * x - y * y; }},
    {3, "3yx2-y3", false, [](double x, double y, double) { return 3 * y * x * x - y * y * y; }},
    {3, "xyz", true, [](double x, double y, double z) { return x * y * z; }},
    {3, "5yz2-yr2", false, [](double x, double y, double z) { return 5 * y * z * z - y * (x * x + y * y + z * z); }},
    {3, "2z3-3z(x2+y2)", true, [](double x, double y, double z) { return 2 * z * z * z - 3 * z * (x * x + y * y); }},
    {3, "5xz2-xr2", false, [](double x, double y, double z) { return 5 * x * z * z - x * (x * x + y * y + z * z); }},
    {3, "z(x2-y2)", true, [](double x, double y, double z) { return z * (x * x - y * y); }},
    {3, "x3-3xy2", false, [](double x, double y, double) { return x * x * x - 3 * x * y * y; }},
};

void check_order(int order) {
  if (order < 1 || order > 3) fail(ErrorKind::InvalidArgument, "unsupported harmonic order " + std::to_string(order));
}

} // namespace

std::vector<HarmonicTerm> harmonic_terms(int order, int dimensionality) {
  check_order(order);
  std::vector<HarmonicTerm> out;
  for (auto const& t : kTerms)
    if (t.order <= order && (dimensionality > 2 || !t.uses_z_only)) out.push_back({t.order, t.name, t.uses_z_only});
  return out;
}

Index field_term_count(int order, int dimensionality, bool global_term) {
  return static_cast<Index>(harmonic_terms(order, dimensionality).size()) + (global_term ? 1 : 0);
}

RealMatrix solid_harmonics(int order, RealMatrix const& coords, int dimensionality) {
  check_order(order);
  require(coords.cols() == 3, "solid_harmonics: coordinates must be L x 3");
  std::vector<Definition const*> selected;
  for (auto const& t : kTerms)
    if (t.order <= order && (dimensionality > 2 || !t.uses_z_only)) selected.push_back(&t);
  RealMatrix out(static_cast<Index>(selected.size()), coords.rows());
  for (Index l = 0; l < coords.rows(); ++l)
    for (std::size_t i = 0; i < selected.size(); ++i)
      out(static_cast<Index>(i), l) = selected[i]->eval(coords(l, 0), coords(l, 1), coords(l, 2));
  return out;
}

} // namespace nfsense
