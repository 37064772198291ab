#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace harmony::btrank {

/// wins(i, j) = number of times methods[i] beat methods[j].
struct ComparisonMatrix {
    std::vector<std::string> methods;
    Eigen::MatrixXd wins;

    static ComparisonMatrix with_methods(std::vector<std::string> names);

    std::size_t size() const { return methods.size(); }
    /// Index of a method, or -1.
    int index_of(const std::string& name) const;
    /// Adds the method if missing and returns its index.
    int ensure(const std::string& name);
    void add(const std::string& winner, const std::string& loser, double count = 1.0);
    double total() const { return wins.sum(); }
    void validate() const;
    /// True when the undirected graph of compared pairs is connected.
    bool connected() const;

    bool operator==(const ComparisonMatrix& o) const {
        return methods == o.methods && wins.rows() == o.wins.rows() && wins.cols() == o.wins.cols() && wins == o.wins;
    }
};

struct BTScores {
    std::vector<std::string> methods;
    Eigen::VectorXd log_worth;
    std::string normalization = "zero_mean_log_worth";
    bool converged = false;
    int iterations = 0;
    /// Methods that received the 0.5 pseudo-count.
    std::vector<std::string> pseudo_counted;
    /// Log-likelihood of the fitted counts before the first update and after each one.
    std::vector<double> log_likelihood;

    int index_of(const std::string& name) const;
};

/// Log-likelihood sum_{i != j} wins(i,j) * log(p_i / (p_i + p_j)) with p = exp(log_worth).
double log_likelihood(const Eigen::MatrixXd& wins, const Eigen::VectorXd& log_worth);

/// Minorization-maximization fit. Every method with zero wins or zero losses
/// gets 0.5 added in both directions of each pair it was compared in. Stops
/// when the largest log-worth change drops below `tol`; otherwise returns the
/// last iterate with converged = false. Throws Errc::disconnected if the
/// comparison graph is not connected.
BTScores fit_bradley_terry(const ComparisonMatrix& m, int max_iters = 10000, double tol = 1e-10);

double predict_win_prob(const BTScores& s, int i, int j);
double predict_win_prob(const BTScores& s, const std::string& a, const std::string& b);

/// Lines of `method_a,method_b,winner[,count]`; an optional header line
/// starting with `method_a` is skipped.
ComparisonMatrix parse_comparisons(std::istream& in, const std::string& source = "<stream>");
ComparisonMatrix read_comparisons(const std::filesystem::path& path);
/// One line per compared unordered pair and winner, pairs in name order.
std::string comparisons_csv(const ComparisonMatrix& m);

std::string ranked_table(const BTScores& s);
std::string scores_json(const BTScores& s);

/// Seeded duels between methods with the given positive worths.
ComparisonMatrix simulate_duels(const std::vector<std::string>& names, const std::vector<double>& worths,
                                int duels_per_pair, std::uint64_t seed);

}  // namespace harmony::btrank
