#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "hyperpair/types.hpp"

namespace hyperpair {

enum class Party { A, B };

// Degree of freedom carried by a subsystem. Generic subsystems are legal
// everywhere except analyzer-setting resolution, which needs to know what
// kind of hardware addresses them.
enum class Dof { Poln, Spatial, Etime, Generic };

inline std::string to_string(Party p) { return p == Party::A ? "A" : "B"; }

inline std::string to_string(Dof d) {
  switch (d) {
    case Dof::Poln: return "poln";
    case Dof::Spatial: return "spatial";
    case Dof::Etime: return "etime";
    default: return "generic";
  }
}

inline Party party_from_string(const std::string& s) {
  if (s == "A") return Party::A;
  if (s == "B") return Party::B;
  throw ValidationError("unknown party label: " + s);
}

inline Dof dof_from_string(const std::string& s) {
  if (s == "poln") return Dof::Poln;
  if (s == "spatial") return Dof::Spatial;
  if (s == "etime") return Dof::Etime;
  if (s == "generic") return Dof::Generic;
  throw ValidationError("unknown subsystem label: " + s);
}

struct Subsystem {
  int dim = 0;
  Party party = Party::A;
  Dof dof = Dof::Generic;

  friend bool operator==(const Subsystem&, const Subsystem&) = default;
};

/// Ordered list of local dimensions with party (and optionally DOF)
/// annotations. The linear index convention is row-major mixed radix:
/// subsystem 0 is the most significant digit.
class SubsystemLayout {
 public:
  SubsystemLayout() = default;

  explicit SubsystemLayout(std::vector<Subsystem> subs) : subs_(std::move(subs)) {
    for (const auto& s : subs_) {
      if (s.dim < 1) throw ValidationError("subsystem dimension must be positive");
    }
  }

  int size() const { return static_cast<int>(subs_.size()); }

  int total_dim() const {
    int d = 1;
    for (const auto& s : subs_) d *= s.dim;
    return d;
  }

  const Subsystem& sub(int i) const { return subs_.at(static_cast<size_t>(i)); }
  Party party_of(int i) const { return sub(i).party; }
  int dim_of(int i) const { return sub(i).dim; }

  std::vector<int> dims() const {
    std::vector<int> d(subs_.size());
    std::transform(subs_.begin(), subs_.end(), d.begin(), [](const Subsystem& s) { return s.dim; });
    return d;
  }

  std::vector<int> party_indices(Party p) const {
    std::vector<int> idx;
    for (int i = 0; i < size(); ++i)
      if (subs_[static_cast<size_t>(i)].party == p) idx.push_back(i);
    return idx;
  }

  int party_dim(Party p) const {
    int d = 1;
    for (int i : party_indices(p)) d *= dim_of(i);
    return d;
  }

  // Row-major strides: linear = sum_k component_k * stride_k.
  std::vector<int> strides() const {
    std::vector<int> st(subs_.size(), 1);
    for (int k = size() - 2; k >= 0; --k)
      st[static_cast<size_t>(k)] = st[static_cast<size_t>(k + 1)] * subs_[static_cast<size_t>(k + 1)].dim;
    return st;
  }

  SubsystemLayout concat(const SubsystemLayout& other) const {
    std::vector<Subsystem> s = subs_;
    s.insert(s.end(), other.subs_.begin(), other.subs_.end());
    return SubsystemLayout(std::move(s));
  }

  // Layout whose subsystem i is this->sub(perm[i]).
  SubsystemLayout permuted(const std::vector<int>& perm) const {
    check_perm(perm);
    std::vector<Subsystem> s;
    s.reserve(perm.size());
    for (int p : perm) s.push_back(sub(p));
    return SubsystemLayout(std::move(s));
  }

  SubsystemLayout selected(const std::vector<int>& keep) const {
    std::vector<Subsystem> s;
    s.reserve(keep.size());
    for (int k : keep) s.push_back(sub(k));
    return SubsystemLayout(std::move(s));
  }

  bool same_dims(const SubsystemLayout& other) const { return dims() == other.dims(); }

  friend bool operator==(const SubsystemLayout&, const SubsystemLayout&) = default;

 private:
  void check_perm(const std::vector<int>& perm) const {
    if (static_cast<int>(perm.size()) != size())
      throw ValidationError("permutation length does not match subsystem count");
    std::vector<int> seen(perm.size(), 0);
    for (int p : perm) {
      if (p < 0 || p >= size() || seen[static_cast<size_t>(p)]++)
        throw ValidationError("not a permutation of subsystem indices");
    }
  }

  std::vector<Subsystem> subs_;
};

// Convenience factories for the layouts this toolkit actually meets.

/// One subsystem per party, same local dimension (e.g. a 2x2 or 6x6 pair).
inline SubsystemLayout pair_layout(int local_dim, Dof dof = Dof::Generic) {
  return SubsystemLayout({{local_dim, Party::A, dof}, {local_dim, Party::B, dof}});
}

/// Photon-pair layout in canonical order: per photon (A then B) the present
/// DOFs in the fixed order polarization, spatial, energy-time.
inline SubsystemLayout photon_pair_layout(bool with_spatial, int spatial_dim, bool with_etime) {
  std::vector<Subsystem> subs;
  for (Party p : {Party::A, Party::B}) {
    subs.push_back({2, p, Dof::Poln});
    if (with_spatial) subs.push_back({spatial_dim, p, Dof::Spatial});
    if (with_etime) subs.push_back({2, p, Dof::Etime});
  }
  return SubsystemLayout(std::move(subs));
}

}  // namespace hyperpair
