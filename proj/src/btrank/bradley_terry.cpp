#include "harmony/btrank/bradley_terry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "harmony/error.hpp"
#include "harmony/rng.hpp"

namespace harmony::btrank {

ComparisonMatrix ComparisonMatrix::with_methods(std::vector<std::string> names) {
    ComparisonMatrix m;
    for (auto& n : names) m.ensure(n);
    return m;
}

int ComparisonMatrix::index_of(const std::string& name) const {
    auto it = std::find(methods.begin(), methods.end(), name);
    return it == methods.end() ? -1 : static_cast<int>(it - methods.begin());
}

int ComparisonMatrix::ensure(const std::string& name) {
    if (name.empty()) throw Error(Errc::invalid_argument, "empty method name");
    if (int i = index_of(name); i >= 0) return i;
    methods.push_back(name);
    const Eigen::Index n = static_cast<Eigen::Index>(methods.size());
    wins.conservativeResize(n, n);
    wins.row(n - 1).setZero();
    wins.col(n - 1).setZero();
    return static_cast<int>(n - 1);
}

void ComparisonMatrix::add(const std::string& winner, const std::string& loser, double count) {
    if (winner == loser) throw Error(Errc::invalid_argument, "a method cannot be compared with itself: " + winner);
    if (!(count >= 0) || count != std::floor(count)) {
        throw Error(Errc::invalid_argument, "comparison counts must be nonnegative integers");
    }
    const int w = ensure(winner);
    const int l = ensure(loser);
    wins(w, l) += count;
}

void ComparisonMatrix::validate() const {
    const Eigen::Index n = static_cast<Eigen::Index>(methods.size());
    if (wins.rows() != n || wins.cols() != n) throw Error(Errc::dimension_mismatch, "wins matrix does not match methods");
    for (Eigen::Index i = 0; i < n; ++i) {
        if (wins(i, i) != 0) throw Error(Errc::invalid_argument, "wins diagonal must be zero");
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!(wins(i, j) >= 0) || wins(i, j) != std::floor(wins(i, j))) {
                throw Error(Errc::invalid_argument, "wins must be nonnegative integers");
            }
        }
    }
}

bool ComparisonMatrix::connected() const {
    const int n = static_cast<int>(methods.size());
    if (n == 0) return false;
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int reached = 1;
    while (!stack.empty()) {
        const int i = stack.back();
        stack.pop_back();
        for (int j = 0; j < n; ++j) {
            if (!seen[j] && wins(i, j) + wins(j, i) > 0) {
                seen[j] = 1;
                ++reached;
                stack.push_back(j);
            }
        }
    }
    return reached == n;
}

int BTScores::index_of(const std::string& name) const {
    auto it = std::find(methods.begin(), methods.end(), name);
    return it == methods.end() ? -1 : static_cast<int>(it - methods.begin());
}

namespace {

double log_sum_exp(double a, double b) {
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace

double log_likelihood(const Eigen::MatrixXd& wins, const Eigen::VectorXd& log_worth) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < wins.rows(); ++i) {
        for (Eigen::Index j = 0; j < wins.cols(); ++j) {
            if (i == j || wins(i, j) == 0) continue;
            ll += wins(i, j) * (log_worth[i] - log_sum_exp(log_worth[i], log_worth[j]));
        }
    }
    return ll;
}

BTScores fit_bradley_terry(const ComparisonMatrix& m, int max_iters, double tol) {
    m.validate();
    if (m.size() < 2) throw Error(Errc::invalid_argument, "need at least two methods");
    if (max_iters < 1 || !(tol > 0)) throw Error(Errc::invalid_argument, "max_iters must be >= 1 and tol > 0");
    if (!m.connected()) throw Error(Errc::disconnected, "comparison graph is not connected");

    const Eigen::Index n = static_cast<Eigen::Index>(m.size());
    BTScores s;
    s.methods = m.methods;
    Eigen::MatrixXd w = m.wins;
    const Eigen::VectorXd row_wins = m.wins.rowwise().sum();
    const Eigen::VectorXd col_losses = m.wins.colwise().sum().transpose();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (row_wins[i] > 0 && col_losses[i] > 0) continue;
        s.pseudo_counted.push_back(m.methods[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j || m.wins(i, j) + m.wins(j, i) == 0) continue;
            w(i, j) += 0.5;
            w(j, i) += 0.5;
        }
    }

    const Eigen::MatrixXd games = w + w.transpose();
    const Eigen::VectorXd total_wins = w.rowwise().sum();
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(n);
    double ll = log_likelihood(w, theta);
    s.log_likelihood.push_back(ll);

    for (int it = 1; it <= max_iters; ++it) {
        // Worths relative to the current maximum keep exp() in range.
        const Eigen::VectorXd p = (theta.array() - theta.maxCoeff()).exp().matrix();
        Eigen::VectorXd next(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            double denom = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j != i && games(i, j) > 0) denom += games(i, j) / (p[i] + p[j]);
            }
            next[i] = total_wins[i] > 0 ? std::log(total_wins[i] / denom) : -std::numeric_limits<double>::infinity();
        }
        next.array() -= next.mean();
        if (!next.allFinite()) throw Error(Errc::non_finite, "Bradley-Terry worths diverged");
        const double change = (next - theta).cwiseAbs().maxCoeff();
        theta = next;
        const double next_ll = log_likelihood(w, theta);
        if (next_ll < ll - 1e-12 * std::max(1.0, std::abs(ll))) {
            throw std::logic_error("Bradley-Terry log-likelihood decreased at iteration " + std::to_string(it));
        }
        ll = next_ll;
        s.log_likelihood.push_back(ll);
        s.iterations = it;
        if (change < tol) {
            s.converged = true;
            break;
        }
    }
    s.log_worth = theta;
    return s;
}

double predict_win_prob(const BTScores& s, int i, int j) {
    const int n = static_cast<int>(s.methods.size());
    if (i < 0 || j < 0 || i >= n || j >= n) throw Error(Errc::not_found, "method index out of range");
    if (i == j) throw Error(Errc::invalid_argument, "predict_win_prob needs two different methods");
    const double d = s.log_worth[i] - s.log_worth[j];
    // Evaluated on the favoured side so that p(i,j) + p(j,i) == 1 exactly.
    if (d >= 0) return 1.0 / (1.0 + std::exp(-d));
    return 1.0 - 1.0 / (1.0 + std::exp(d));
}

double predict_win_prob(const BTScores& s, const std::string& a, const std::string& b) {
    const int i = s.index_of(a), j = s.index_of(b);
    if (i < 0) throw Error(Errc::not_found, "unknown method " + a);
    if (j < 0) throw Error(Errc::not_found, "unknown method " + b);
    return predict_win_prob(s, i, j);
}

namespace {

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

ComparisonMatrix parse_comparisons(std::istream& in, const std::string& source) {
    ComparisonMatrix m;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto cells = split_csv(line);
        const auto where = source + ":" + std::to_string(lineno);
        if (cells.size() < 3 || cells.size() > 4) {
            throw Error(Errc::parse, where + ": expected method_a,method_b,winner[,count]");
        }
        if (cells[0] == "method_a") continue;
        const auto& a = cells[0];
        const auto& b = cells[1];
        const auto& winner = cells[2];
        if (a.empty() || b.empty() || a == b) throw Error(Errc::parse, where + ": two different method names required");
        if (winner != a && winner != b) throw Error(Errc::parse, where + ": winner must be one of the two methods");
        double count = 1.0;
        if (cells.size() == 4) {
            try {
                std::size_t used = 0;
                const long long c = std::stoll(cells[3], &used);
                if (used != cells[3].size() || c < 0) throw std::invalid_argument("count");
                count = static_cast<double>(c);
            } catch (const std::exception&) {
                throw Error(Errc::parse, where + ": count must be a nonnegative integer");
            }
        }
        m.ensure(a);
        m.ensure(b);
        m.add(winner, winner == a ? b : a, count);
    }
    return m;
}

ComparisonMatrix read_comparisons(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io, "cannot open " + path.string());
    return parse_comparisons(in, path.string());
}

std::string comparisons_csv(const ComparisonMatrix& m) {
    std::vector<int> order(m.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return m.methods[a] < m.methods[b]; });
    std::ostringstream os;
    os << "method_a,method_b,winner,count\n";
    for (std::size_t x = 0; x < order.size(); ++x) {
        for (std::size_t y = x + 1; y < order.size(); ++y) {
            const int i = order[x], j = order[y];
            for (int win : {i, j}) {
                const double c = win == i ? m.wins(i, j) : m.wins(j, i);
                if (c == 0) continue;
                os << m.methods[i] << ',' << m.methods[j] << ',' << m.methods[win] << ','
                   << static_cast<long long>(c) << '\n';
            }
        }
    }
    return os.str();
}

std::string ranked_table(const BTScores& s) {
    std::vector<int> order(s.methods.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (s.log_worth[a] != s.log_worth[b]) return s.log_worth[a] > s.log_worth[b];
        return s.methods[a] < s.methods[b];
    });
    std::size_t width = 6;
    for (const auto& m : s.methods) width = std::max(width, m.size());
    std::ostringstream os;
    char buf[64];
    os << "rank  " << "method" << std::string(width - 6, ' ') << "  log_worth\n";
    for (std::size_t r = 0; r < order.size(); ++r) {
        const auto& name = s.methods[order[r]];
        std::snprintf(buf, sizeof buf, "%9.6f", s.log_worth[order[r]]);
        char rank[24];
        std::snprintf(rank, sizeof rank, "%-6zu", r + 1);
        os << rank << name << std::string(width - name.size(), ' ') << "  " << buf << '\n';
    }
    os << "(" << s.normalization << ", " << (s.converged ? "converged" : "NOT converged") << " after "
       << s.iterations << " iterations)\n";
    return os.str();
}

std::string scores_json(const BTScores& s) {
    nlohmann::ordered_json j;
    j["normalization"] = s.normalization;
    j["converged"] = s.converged;
    j["iterations"] = s.iterations;
    j["pseudo_counted"] = s.pseudo_counted;
    auto& scores = j["scores"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < s.methods.size(); ++i) {
        scores.push_back({{"method", s.methods[i]}, {"log_worth", s.log_worth[static_cast<Eigen::Index>(i)]}});
    }
    return j.dump(2) + "\n";
}

ComparisonMatrix simulate_duels(const std::vector<std::string>& names, const std::vector<double>& worths,
                                int duels_per_pair, std::uint64_t seed) {
    if (names.size() != worths.size()) throw Error(Errc::dimension_mismatch, "one worth per method required");
    for (double w : worths) {
        if (!(w > 0) || !std::isfinite(w)) throw Error(Errc::invalid_argument, "worths must be positive");
    }
    auto m = ComparisonMatrix::with_methods(names);
    SplitMix rng(seed);
    for (std::size_t i = 0; i < names.size(); ++i) {
        for (std::size_t j = i + 1; j < names.size(); ++j) {
            const double p = worths[i] / (worths[i] + worths[j]);
            for (int k = 0; k < duels_per_pair; ++k) {
                if (rng.uniform() < p) m.wins(Eigen::Index(i), Eigen::Index(j)) += 1;
                else m.wins(Eigen::Index(j), Eigen::Index(i)) += 1;
            }
        }
    }
    return m;
}

}  // namespace harmony::btrank
