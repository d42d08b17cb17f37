#pragma once

// Shared fixtures: ground-state profiles are expensive enough to cache per
// (N, p) across test cases, and several suites need the same ball/ellipsoid
// problems.

#include <map>
#include <memory>
#include <utility>

#include "spikelab/spikelab.hpp"

namespace testutil {

inline std::shared_ptr<const spikelab::RadialProfile>
cached_profile(int n, double p, double tol = 1e-12) {
    static std::map<std::pair<int, double>,
                    std::shared_ptr<const spikelab::RadialProfile>>
        cache;
    auto key = std::make_pair(n, p);
    auto it = cache.find(key);
    if (it == cache.end()) {
        auto prof = std::make_shared<spikelab::RadialProfile>(
            spikelab::solve_ground_state(n, p, tol));
        it = cache.emplace(key, std::move(prof)).first;
    }
    return it->second;
}

inline spikelab::ProblemData make_ball_problem(int n, double p,
                                               const std::string& j_src,
                                               const std::string& v_src,
                                               double radius = 1.0) {
    using namespace spikelab;
    DomainSpec dom = DomainSpec::ball(Vector::Zero(n), radius);
    return ProblemData(n, p, std::move(dom),
                       PotentialField::parse(j_src, n),
                       PotentialField::parse(v_src, n),
                       cached_profile(n, p));
}

inline spikelab::ProblemData make_ellipsoid_problem(
    int n, double p, const spikelab::Vector& semi_axes,
    const std::string& j_src = "1", const std::string& v_src = "1") {
    using namespace spikelab;
    return ProblemData(n, p, DomainSpec::ellipsoid(semi_axes),
                       PotentialField::parse(j_src, n),
                       PotentialField::parse(v_src, n),
                       cached_profile(n, p));
}

inline spikelab::Vector vec3(double a, double b, double c) {
    spikelab::Vector v(3);
    v << a, b, c;
    return v;
}

} // namespace testutil
