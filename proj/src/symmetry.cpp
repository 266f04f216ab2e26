#include "nqs/symmetry.hpp"

#include <map>
#include <set>

namespace nqs {

namespace {

std::vector<int> identity_perm(int n) {
  std::vector<int> p(n);
  for (int i = 0; i < n; ++i) p[i] = i;
  return p;
}

// Composition: (a ∘ b)(sigma) = a(b(sigma)). Site i of the result reads site
// b.perm[a.perm[i]] of the source, since a reads its input at a.perm[i] and
// that input was produced by b.
SymmetryOp compose(const SymmetryOp& a, const SymmetryOp& b) {
  SymmetryOp out;
  out.perm.resize(a.perm.size());
  for (std::size_t i = 0; i < a.perm.size(); ++i) out.perm[i] = b.perm[a.perm[i]];
  out.flip = a.flip != b.flip;
  return out;
}

}  // namespace

std::vector<SymmetryOp> build_symmetry_group(const Lattice& lat,
                                             std::span<const std::string> generators) {
  const int rows = lat.rows;
  const int cols = lat.cols;
  const int n = lat.n_sites();
  auto site = [cols](int r, int c) { return r * cols + c; };

  std::vector<SymmetryOp> gens;
  for (const std::string& name : generators) {
    SymmetryOp op;
    op.perm = identity_perm(n);
    if (name == "z2") {
      op.flip = true;
    } else if (name == "reflect_x") {
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) op.perm[site(r, c)] = site(r, cols - 1 - c);
    } else if (name == "reflect_y") {
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) op.perm[site(r, c)] = site(rows - 1 - r, c);
    } else {
      throw std::invalid_argument("unknown symmetry generator: " + name);
    }
    gens.push_back(std::move(op));
  }

  // Breadth-first closure starting from the identity.
  auto key = [](const SymmetryOp& op) {
    std::vector<int> k = op.perm;
    k.push_back(op.flip ? 1 : 0);
    return k;
  };
  std::vector<SymmetryOp> group;
  std::set<std::vector<int>> seen;
  SymmetryOp id;
  id.perm = identity_perm(n);
  group.push_back(id);
  seen.insert(key(id));
  for (std::size_t i = 0; i < group.size(); ++i) {
    for (const SymmetryOp& g : gens) {
      SymmetryOp next = compose(g, group[i]);
      if (seen.insert(key(next)).second) group.push_back(std::move(next));
    }
  }
  return group;
}

}  // namespace nqs
