#pragma once

// Restoration path search: priority-driven topological repair, a
// multi-population genetic algorithm over (priority permutation, link bits)
// and a shortest-path baseline.

#include "blackstart/errors.hpp"
#include "blackstart/grid_model.hpp"
#include "blackstart/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace blackstart {

/// Genotype: `genes[k]` is the branch with the k-th highest priority;
/// `include_link[b]` allows branch b to close a loop.
struct Chromosome {
    std::vector<int> genes;
    std::vector<char> include_link;
    std::optional<double> fitness;  ///< present iff simulated; +inf when infeasible

    [[nodiscard]] bool structurally_valid(std::size_t branch_count) const {
        if (genes.size() != branch_count || include_link.size() != branch_count) return false;
        std::vector<char> seen(branch_count, 0);
        for (int g : genes) {
            if (g < 0 || static_cast<std::size_t>(g) >= branch_count || seen[g]) return false;
            seen[g] = 1;
        }
        return true;
    }
};

struct GaConfig {
    int subpopulations = 6;
    int subpop_size = 10;
    int max_generations = 200;
    double migration_rate = 0.2;
    int migration_interval = 10;
    double crossover_start = 0.9;  ///< crossover probability at generation 0
    double crossover_end = 0.6;    ///< ... at the last generation
    double mutation_rate = 0.3;    ///< probability of one swap per offspring
    double bit_flip_rate = -1.0;   ///< per-bit; negative means 1 / branch count
    int tournament_size = 2;
    int regenerate_attempts = 20;
    std::uint64_t rng_seed = 1;
    unsigned threads = 0;  ///< 0: hardware concurrency, capped by BLACKSTART_THREADS
    SimulationOptions simulation;

    void validate() const {
        if (subpopulations < 1 || subpop_size < 1 || max_generations < 1 || migration_interval < 1 ||
            tournament_size < 1 || regenerate_attempts < 0)
            throw ValidationError("GA counts must be at least 1");
        for (double r : {migration_rate, crossover_start, crossover_end, mutation_rate})
            if (!(r >= 0.0 && r <= 1.0)) throw ValidationError("GA rates must lie in [0, 1]");
        if (bit_flip_rate > 1.0) throw ValidationError("GA rates must lie in [0, 1]");
    }
};

// -----------------------------------------------------------------------------
// Repair
// -----------------------------------------------------------------------------

namespace detail {

/// Removes branches whose far end is a leaf without a source, repeatedly.
inline std::vector<int> strip_dangling(const GridModel& model, const std::vector<int>& order) {
    std::vector<int> degree(model.node_count(), 0);
    std::vector<char> kept(model.branch_count(), 0);
    for (int b : order) {
        kept[b] = 1;
        ++degree[model.branches[b].from];
        ++degree[model.branches[b].to];
    }
    const int bs = model.black_start_node();
    bool changed = true;
    while (changed) {
        changed = false;
        for (int b : order) {
            if (!kept[b]) continue;
            const auto& br = model.branches[b];
            for (int end : {br.from, br.to}) {
                if (degree[end] == 1 && end != bs && !model.is_source_node(end)) {
                    kept[b] = 0;
                    --degree[br.from];
                    --degree[br.to];
                    changed = true;
                    break;
                }
            }
        }
    }
    std::vector<int> out;
    for (int b : order)
        if (kept[b]) out.push_back(b);
    return out;
}

inline std::vector<char> link_flags(const GridModel& model, const std::vector<int>& order) {
    std::vector<char> energized(model.node_count(), 0);
    std::vector<char> links(model.branch_count(), 0);
    energized[model.black_start_node()] = 1;
    for (int b : order) {
        const auto& br = model.branches[b];
        if (energized[br.from] && energized[br.to]) links[b] = 1;
        energized[br.from] = energized[br.to] = 1;
    }
    return links;
}

}  // namespace detail

/// Turns a priority permutation into a connectivity-respecting scheme: grow
/// the energized set from the black-start node, always restoring the frontier
/// branch of highest priority, skipping loop closures whose bit is clear,
/// until every source is energized. Branches that only feed source-less
/// leaves are then dropped. Throws Unreachable when some source cannot be
/// reached at all.
inline RestorationScheme its_repair(const Chromosome& chrom, const GridModel& model) {
    const std::size_t nb = model.branch_count();
    if (!chrom.structurally_valid(nb)) throw ValidationError("chromosome is not a permutation of the branches");
    std::vector<int> rank(nb);
    for (std::size_t k = 0; k < nb; ++k) rank[chrom.genes[k]] = static_cast<int>(k);

    std::vector<char> energized(model.node_count(), 0);
    std::vector<char> queued(nb, 0);
    std::priority_queue<int, std::vector<int>, std::greater<>> frontier;  // ranks
    const auto sources = model.source_nodes();
    std::size_t pending = sources.size();
    auto energize = [&](int node) {
        energized[node] = 1;
        if (model.is_source_node(node)) --pending;
        for (int b : model.incident(node))
            if (!queued[b]) {
                queued[b] = 1;
                frontier.push(rank[b]);
            }
    };
    energize(model.black_start_node());

    std::vector<int> order;
    while (pending > 0) {
        if (frontier.empty()) throw Unreachable("some source is not connected to the black-start unit");
        const int b = chrom.genes[frontier.top()];
        frontier.pop();
        const auto& br = model.branches[b];
        const bool ef = energized[br.from] != 0;
        const bool et = energized[br.to] != 0;
        if (ef && et) {
            if (!chrom.include_link[b]) continue;
            order.push_back(b);
            continue;
        }
        order.push_back(b);
        energize(ef ? br.to : br.from);
    }
    RestorationScheme scheme;
    scheme.order = detail::strip_dangling(model, order);
    scheme.include_link = detail::link_flags(model, scheme.order);
    return scheme;
}

/// Amendment: rewrites the priorities so that the repaired order comes first,
/// remaining genes keeping their relative order. Repair of the result is the
/// same scheme.
inline void amend(Chromosome& chrom, const RestorationScheme& scheme) {
    std::vector<char> placed(chrom.genes.size(), 0);
    std::vector<int> genes;
    genes.reserve(chrom.genes.size());
    for (int b : scheme.order) {
        genes.push_back(b);
        placed[b] = 1;
    }
    for (int b : chrom.genes)
        if (!placed[b]) genes.push_back(b);
    chrom.genes = std::move(genes);
    for (std::size_t b = 0; b < chrom.include_link.size(); ++b)
        if (scheme.include_link[b]) chrom.include_link[b] = 1;
}

// -----------------------------------------------------------------------------
// Random streams
// -----------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Independent stream for (seed, a, b, c, d).
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c = 0,
                                   std::uint64_t d = 0) {
    std::uint64_t h = splitmix64(seed);
    for (std::uint64_t v : {a, b, c, d}) h = splitmix64(h ^ v);
    return std::mt19937_64(h);
}

inline Chromosome random_chromosome(std::size_t branch_count, std::mt19937_64& rng) {
    Chromosome c;
    c.genes.resize(branch_count);
    std::iota(c.genes.begin(), c.genes.end(), 0);
    std::shuffle(c.genes.begin(), c.genes.end(), rng);
    c.include_link.resize(branch_count);
    std::bernoulli_distribution coin(0.5);
    for (auto& bit : c.include_link) bit = coin(rng) ? 1 : 0;
    return c;
}

// -----------------------------------------------------------------------------
// Operators
// -----------------------------------------------------------------------------

/// Two-point order crossover: the child keeps a segment of `a` in place and
/// fills the other positions with the remaining genes in `b`'s order. Bits are
/// mixed uniformly.
inline Chromosome order_crossover(const Chromosome& a, const Chromosome& b, std::mt19937_64& rng) {
    const std::size_t n = a.genes.size();
    Chromosome child;
    child.genes.assign(n, -1);
    child.include_link.resize(n);
    if (n == 0) return child;
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::size_t lo = pick(rng);
    std::size_t hi = pick(rng);
    if (lo > hi) std::swap(lo, hi);
    std::vector<char> used(n, 0);
    for (std::size_t k = lo; k <= hi; ++k) {
        child.genes[k] = a.genes[k];
        used[a.genes[k]] = 1;
    }
    std::size_t pos = 0;
    for (int g : b.genes) {
        if (used[g]) continue;
        while (pos >= lo && pos <= hi) ++pos;
        child.genes[pos++] = g;
    }
    std::bernoulli_distribution coin(0.5);
    for (std::size_t k = 0; k < n; ++k) child.include_link[k] = coin(rng) ? a.include_link[k] : b.include_link[k];
    return child;
}

inline void mutate(Chromosome& c, double swap_rate, double bit_rate, std::mt19937_64& rng) {
    const std::size_t n = c.genes.size();
    if (n >= 2 && std::bernoulli_distribution(swap_rate)(rng)) {
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        const std::size_t i = pick(rng);
        std::size_t j = pick(rng);
        while (j == i) j = pick(rng);
        std::swap(c.genes[i], c.genes[j]);
    }
    std::bernoulli_distribution flip(bit_rate);
    for (auto& bit : c.include_link)
        if (flip(rng)) bit = bit ? 0 : 1;
    c.fitness.reset();
}

// -----------------------------------------------------------------------------
// Parallel evaluation
// -----------------------------------------------------------------------------

inline unsigned worker_count(unsigned requested) {
    unsigned n = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("BLACKSTART_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
    }
    return std::max(1u, n);
}

/// Runs fn(i) for i in [0, count) on up to `workers` threads.
template <class Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn) {
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    if (!failed.exchange(true)) failure = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

/// Memoised fitness of repaired schemes. Lookups and inserts happen on the
/// calling thread only; simulations of new schemes run in parallel.
class FitnessCache {
public:
    FitnessCache(const GridModel& model, SimulationOptions opt, unsigned workers)
        : model_(model), opt_(std::move(opt)), workers_(workers) {}

    /// Repairs, amends and scores every chromosome in place.
    void evaluate(std::vector<Chromosome*>& batch) {
        std::vector<RestorationScheme> schemes(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) {
            schemes[i] = its_repair(*batch[i], model_);
            amend(*batch[i], schemes[i]);
        }
        std::vector<const RestorationScheme*> fresh;
        std::map<std::vector<int>, std::size_t> fresh_index;
        for (const auto& s : schemes)
            if (!cache_.count(s.order) && !fresh_index.count(s.order)) {
                fresh_index.emplace(s.order, fresh.size());
                fresh.push_back(&s);
            }
        std::vector<double> scores(fresh.size());
        parallel_for(fresh.size(), workers_, [&](std::size_t i) {
            const auto tl = run_simulation(model_, *fresh[i], opt_);
            scores[i] = tl.feasible ? tl.objective : std::numeric_limits<double>::infinity();
        });
        for (std::size_t i = 0; i < fresh.size(); ++i) cache_.emplace(fresh[i]->order, scores[i]);
        simulations_ += fresh.size();
        for (std::size_t i = 0; i < batch.size(); ++i) batch[i]->fitness = cache_.at(schemes[i].order);
    }

    [[nodiscard]] std::size_t simulations() const { return simulations_; }

private:
    const GridModel& model_;
    SimulationOptions opt_;
    unsigned workers_;
    std::map<std::vector<int>, double> cache_;
    std::size_t simulations_ = 0;
};

// -----------------------------------------------------------------------------
// Multi-population GA
// -----------------------------------------------------------------------------

struct HistoryRow {
    int generation = 0;
    int subpopulation = 0;
    double best_f = 0.0;  ///< +inf when no feasible member
    double mean_f = 0.0;  ///< over feasible members; +inf when none
    int feasible_count = 0;
};

struct GaResult {
    RestorationScheme best;
    Timeline best_timeline;
    std::vector<HistoryRow> history;
    std::vector<double> best_by_generation;  ///< best F ever seen after each generation
    std::size_t simulations = 0;
};

inline GaResult mpga_optimize(const GridModel& model, const GaConfig& config) {
    config.validate();
    const std::size_t nb = model.branch_count();
    const auto inf = std::numeric_limits<double>::infinity();
    const double bit_rate = config.bit_flip_rate >= 0 ? config.bit_flip_rate : 1.0 / std::max<std::size_t>(1, nb);
    const int n_pop = config.subpopulations;
    const int size = config.subpop_size;
    const std::uint64_t seed = config.rng_seed;
    enum Purpose : std::uint64_t { init = 1, regen = 2, breed = 3 };

    // fails early if a source is unreachable in the full graph
    {
        Chromosome probe;
        probe.genes.resize(nb);
        std::iota(probe.genes.begin(), probe.genes.end(), 0);
        probe.include_link.assign(nb, 0);
        (void)its_repair(probe, model);
    }

    FitnessCache cache(model, config.simulation, worker_count(config.threads));
    std::vector<std::vector<Chromosome>> pops(n_pop);
    for (int p = 0; p < n_pop; ++p)
        for (int i = 0; i < size; ++i) {
            auto rng = make_stream(seed, init, p, i);
            pops[p].push_back(random_chromosome(nb, rng));
        }

    GaResult result;
    std::optional<Chromosome> best;
    auto stream_id = [&](int gen, int p, int i) {
        return (static_cast<std::uint64_t>(gen) << 32) ^ (static_cast<std::uint64_t>(p) << 16) ^
               static_cast<std::uint64_t>(i);
    };

    for (int gen = 0; gen < config.max_generations; ++gen) {
        // evaluate, then replace infeasible members by fresh random ones
        std::vector<Chromosome*> batch;
        for (auto& pop : pops)
            for (auto& c : pop)
                if (!c.fitness) batch.push_back(&c);
        cache.evaluate(batch);
        for (int attempt = 0; attempt < config.regenerate_attempts; ++attempt) {
            batch.clear();
            for (int p = 0; p < n_pop; ++p)
                for (int i = 0; i < size; ++i) {
                    auto& c = pops[p][i];
                    if (*c.fitness < inf) continue;
                    auto rng = make_stream(seed, regen, stream_id(gen, p, i), attempt);
                    c = random_chromosome(nb, rng);
                    batch.push_back(&c);
                }
            if (batch.empty()) break;
            cache.evaluate(batch);
        }

        for (int p = 0; p < n_pop; ++p) {
            HistoryRow row{gen, p, inf, inf, 0};
            double sum = 0.0;
            for (const auto& c : pops[p]) {
                if (!(*c.fitness < inf)) continue;
                ++row.feasible_count;
                sum += *c.fitness;
                row.best_f = std::min(row.best_f, *c.fitness);
                if (!best || *c.fitness < *best->fitness) best = c;
            }
            if (row.feasible_count) row.mean_f = sum / row.feasible_count;
            result.history.push_back(row);
        }
        result.best_by_generation.push_back(best ? *best->fitness : inf);
        if (gen + 1 == config.max_generations) break;

        // sort each subpopulation best first (stable: ties keep slot order)
        for (auto& pop : pops)
            std::stable_sort(pop.begin(), pop.end(),
                             [](const Chromosome& a, const Chromosome& b) { return *a.fitness < *b.fitness; });

        // ring migration: the top individuals of p replace the worst of p+1
        if (n_pop > 1 && (gen + 1) % config.migration_interval == 0) {
            const int k = std::min(size, static_cast<int>(std::ceil(config.migration_rate * size)));
            std::vector<std::vector<Chromosome>> emigrants(n_pop);
            for (int p = 0; p < n_pop; ++p) emigrants[p].assign(pops[p].begin(), pops[p].begin() + k);
            for (int p = 0; p < n_pop; ++p) {
                auto& dst = pops[(p + 1) % n_pop];
                for (int j = 0; j < k; ++j) dst[size - 1 - j] = emigrants[p][j];
                std::stable_sort(dst.begin(), dst.end(),
                                 [](const Chromosome& a, const Chromosome& b) { return *a.fitness < *b.fitness; });
            }
        }

        const double progress = config.max_generations > 1 ? static_cast<double>(gen) / (config.max_generations - 1) : 0;
        const double pc = config.crossover_start + (config.crossover_end - config.crossover_start) * progress;
        for (int p = 0; p < n_pop; ++p) {
            const auto& pop = pops[p];
            std::vector<Chromosome> next;
            next.reserve(size);
            next.push_back(pop.front());  // elite
            for (int i = 1; i < size; ++i) {
                auto rng = make_stream(seed, breed, stream_id(gen, p, i));
                std::uniform_int_distribution<int> pick(0, size - 1);
                auto tournament = [&]() -> const Chromosome& {
                    int w = pick(rng);
                    for (int t = 1; t < config.tournament_size; ++t) w = std::min(w, pick(rng));
                    return pop[w];  // sorted: lower slot is fitter
                };
                const Chromosome& a = tournament();
                const Chromosome& b = tournament();
                Chromosome child = std::bernoulli_distribution(pc)(rng) ? order_crossover(a, b, rng) : a;
                mutate(child, config.mutation_rate, bit_rate, rng);
                next.push_back(std::move(child));
            }
            pops[p] = std::move(next);
        }
    }

    if (!best) throw NoFeasibleScheme();
    result.best = its_repair(*best, model);
    result.best_timeline = run_simulation(model, result.best, config.simulation);
    result.simulations = cache.simulations();
    return result;
}

// -----------------------------------------------------------------------------
// Shortest-path baseline
// -----------------------------------------------------------------------------

/// Connects the sources one after another, in `source_order` (external node
/// ids, black-start unit first), each through the shortest path in restore
/// time from the energized set. Equal-cost paths are resolved by the
/// lexicographically smallest branch-id sequence. The result is a tree.
inline RestorationScheme dijkstra_baseline(const GridModel& model, const std::vector<int>& source_order) {
    const auto sources = model.source_nodes();
    std::vector<int> order_nodes;
    for (int id : source_order) order_nodes.push_back(model.node_index(id));
    {
        auto a = order_nodes;
        auto b = sources;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        if (a != b) throw ValidationError("source order must list every source node exactly once");
        if (order_nodes.empty() || order_nodes.front() != model.black_start_node())
            throw ValidationError("source order must start with the black-start unit");
    }
    const std::size_t n = model.node_count();
    std::vector<char> energized(n, 0);
    energized[model.black_start_node()] = 1;
    RestorationScheme scheme;

    struct Label {
        double cost = std::numeric_limits<double>::infinity();
        std::vector<int> path;  // external branch ids
        std::vector<int> branches;
        bool operator<(const Label& o) const { return cost != o.cost ? cost < o.cost : path < o.path; }
    };
    for (std::size_t s = 1; s < order_nodes.size(); ++s) {
        const int target = order_nodes[s];
        if (energized[target]) continue;
        std::vector<Label> label(n);
        std::vector<char> done(n, 0);
        for (std::size_t v = 0; v < n; ++v)
            if (energized[v]) label[v].cost = 0.0;
        for (;;) {
            int u = -1;
            for (std::size_t v = 0; v < n; ++v)
                if (!done[v] && std::isfinite(label[v].cost) && (u < 0 || label[v] < label[u])) u = static_cast<int>(v);
            if (u < 0) throw Unreachable("node " + std::to_string(model.nodes[target].id) + " cannot be reached");
            done[u] = 1;
            if (u == target) break;
            for (int b : model.incident(u)) {
                const int w = model.branches[b].other(u);
                if (energized[w] || done[w]) continue;
                Label cand;
                cand.cost = label[u].cost + model.branches[b].restore_duration;
                cand.path = label[u].path;
                cand.path.push_back(model.branches[b].id);
                cand.branches = label[u].branches;
                cand.branches.push_back(b);
                if (cand < label[w]) label[w] = std::move(cand);
            }
        }
        for (int b : label[target].branches) {
            scheme.order.push_back(b);
            energized[model.branches[b].from] = energized[model.branches[b].to] = 1;
        }
    }
    scheme.include_link.assign(model.branch_count(), 0);
    return scheme;
}

}  // namespace blackstart
