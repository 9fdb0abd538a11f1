#pragma once

#include <slope/sorted_l1.hpp>

#include <Eigen/Core>
#include <initializer_list>
#include <random>

inline Eigen::VectorXd vec(std::initializer_list<double> values)
{
    Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double x : values) v[i++] = x;
    return v;
}

inline slope::LambdaSeq lam(std::initializer_list<double> values)
{
    return slope::LambdaSeq(vec(values));
}

inline Eigen::VectorXd random_normal(std::mt19937_64& rng, Eigen::Index size, double scale = 1.0)
{
    std::normal_distribution<double> dist(0.0, scale);
    Eigen::VectorXd v(size);
    for (auto& x : v) x = dist(rng);
    return v;
}

/// Random non-increasing nonnegative weights.
inline slope::LambdaSeq random_lambda(std::mt19937_64& rng, Eigen::Index size, double scale = 1.0)
{
    std::uniform_real_distribution<double> unif(0.0, scale);
    Eigen::VectorXd w(size);
    for (auto& x : w) x = unif(rng);
    std::sort(w.begin(), w.end(), std::greater<>());
    return slope::LambdaSeq(w);
}
