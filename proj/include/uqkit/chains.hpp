#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "uqkit/errors.hpp"

namespace uqkit::chains {

// Conditional outcome table for one event in a chain. `table` holds one row
// of outcome probabilities per joint history of all preceding events,
// histories enumerated mixed-radix with the first predecessor most
// significant. A fallback factor carries a single marginal row used for
// every history.
struct ChainFactor {
    std::vector<std::string> outcomes;
    std::vector<std::vector<double>> table;
    bool fallback = false;
};

// Ordered sequence of categorical events, each with a conditional
// distribution given the full joint history of its predecessors.
class EventChain {
public:
    EventChain(std::vector<std::string> events, std::vector<ChainFactor> factors)
        : events_(std::move(events)), factors_(std::move(factors)) {
        if (events_.empty())
            throw InputError("EventChain: need at least one event");
        if (factors_.size() != events_.size())
            throw InputError("EventChain: " + std::to_string(factors_.size()) +
                             " factors for " + std::to_string(events_.size()) + " events");
        std::size_t histories = 1;
        for (std::size_t k = 0; k < factors_.size(); ++k) {
            const ChainFactor& f = factors_[k];
            if (f.outcomes.size() < 2)
                throw InputError("EventChain: event '" + events_[k] +
                                 "' needs at least two outcomes");
            for (std::size_t a = 0; a < f.outcomes.size(); ++a)
                for (std::size_t b = a + 1; b < f.outcomes.size(); ++b)
                    if (f.outcomes[a] == f.outcomes[b])
                        throw InputError("EventChain: event '" + events_[k] +
                                         "' repeats outcome '" + f.outcomes[a] + "'");
            const std::size_t expected_rows = f.fallback ? 1 : histories;
            if (f.table.size() != expected_rows)
                throw InputError("EventChain: event '" + events_[k] + "' has " +
                                 std::to_string(f.table.size()) + " rows but needs " +
                                 std::to_string(expected_rows));
            for (const auto& row : f.table) {
                if (row.size() != f.outcomes.size())
                    throw InputError("EventChain: event '" + events_[k] +
                                     "' has a row of wrong width");
                double sum = 0.0;
                for (double p : row) {
                    if (!(p >= 0.0 && p <= 1.0))
                        throw InputError("EventChain: event '" + events_[k] +
                                         "' has a probability outside [0, 1]");
                    sum += p;
                }
                if (std::abs(sum - 1.0) > 1e-12)
                    throw InputError("EventChain: event '" + events_[k] +
                                     "' has a row summing to " + std::to_string(sum));
            }
            histories *= f.outcomes.size();
        }
    }

    std::size_t n_events() const { return events_.size(); }
    const std::vector<std::string>& events() const { return events_; }
    const ChainFactor& factor(std::size_t k) const { return factors_.at(k); }

    std::size_t outcome_index(std::size_t event, const std::string& label) const {
        const ChainFactor& f = factors_.at(event);
        for (std::size_t i = 0; i < f.outcomes.size(); ++i)
            if (f.outcomes[i] == label) return i;
        throw InputError("EventChain: event '" + events_.at(event) +
                         "' has no outcome '" + label + "'");
    }

    // Row of the k-th factor for the given history of outcome indices of
    // events 0..k-1; the first predecessor is most significant.
    const std::vector<double>& row_for(std::size_t event,
                                       const std::vector<std::size_t>& history) const {
        const ChainFactor& f = factors_.at(event);
        if (history.size() != event)
            throw InputError("EventChain: history length " + std::to_string(history.size()) +
                             " does not match event index " + std::to_string(event));
        if (f.fallback) return f.table.front();
        std::size_t idx = 0;
        for (std::size_t k = 0; k < event; ++k) {
            const std::size_t width = factors_[k].outcomes.size();
            if (history[k] >= width)
                throw InputError("EventChain: history outcome index out of range");
            idx = idx * width + history[k];
        }
        return f.table[idx];
    }

private:
    std::vector<std::string> events_;
    std::vector<ChainFactor> factors_;
};

// Probability of one full path through the chain: the product of each
// event's conditional probability given the path so far.
inline double joint_probability(const EventChain& chain,
                                const std::vector<std::string>& outcome_path) {
    if (outcome_path.size() != chain.n_events())
        throw InputError("joint_probability: path visits " +
                         std::to_string(outcome_path.size()) + " events but the chain has " +
                         std::to_string(chain.n_events()));
    std::vector<std::size_t> history;
    history.reserve(chain.n_events());
    double p = 1.0;
    for (std::size_t k = 0; k < chain.n_events(); ++k) {
        const std::size_t idx = chain.outcome_index(k, outcome_path[k]);
        p *= chain.row_for(k, history)[idx];
        history.push_back(idx);
    }
    return p;
}

// Visits every full path with its probability. Paths are enumerated in
// lexicographic outcome-index order.
inline void for_each_path(const EventChain& chain,
                          const std::function<void(const std::vector<std::size_t>&, double)>& fn) {
    std::vector<std::size_t> path;
    std::function<void(double)> walk = [&](double p) {
        const std::size_t k = path.size();
        if (k == chain.n_events()) {
            fn(path, p);
            return;
        }
        const std::vector<double>& row = chain.row_for(k, path);
        for (std::size_t i = 0; i < row.size(); ++i) {
            path.push_back(i);
            walk(p * row[i]);
            path.pop_back();
        }
    };
    walk(1.0);
}

// One conditional probability that is exactly zero: the event, the outcome,
// and the history it is conditioned on.
struct ZeroEntry {
    std::size_t event_index;
    std::string outcome;
    std::vector<std::string> history;  // outcome labels of events 0..event_index-1
};

// Lists every exactly-zero entry in the conditional tables. A zero anywhere
// pins every path through it to probability zero, however the rest of the
// chain behaves; each is a modeling commitment worth an explicit audit.
inline std::vector<ZeroEntry> zero_probability_audit(const EventChain& chain) {
    std::vector<ZeroEntry> out;
    for (std::size_t k = 0; k < chain.n_events(); ++k) {
        const ChainFactor& f = chain.factor(k);
        if (f.fallback) {
            for (std::size_t i = 0; i < f.outcomes.size(); ++i)
                if (f.table.front()[i] == 0.0)
                    out.push_back({k, f.outcomes[i], {}});
            continue;
        }
        // Enumerate histories in the same mixed-radix order as the rows.
        std::vector<std::size_t> hist(k, 0);
        for (std::size_t row = 0; row < f.table.size(); ++row) {
            for (std::size_t i = 0; i < f.outcomes.size(); ++i) {
                if (f.table[row][i] != 0.0) continue;
                std::vector<std::string> labels;
                labels.reserve(k);
                for (std::size_t j = 0; j < k; ++j)
                    labels.push_back(chain.factor(j).outcomes[hist[j]]);
                out.push_back({k, f.outcomes[i], std::move(labels)});
            }
            // Increment the mixed-radix history counter.
            for (std::size_t j = k; j-- > 0;) {
                if (++hist[j] < chain.factor(j).outcomes.size()) break;
                hist[j] = 0;
            }
        }
    }
    return out;
}

// Replaces the factor at `position` with a history-free fallback carrying
// the given marginal: the maximum-entropy stance toward how predecessors
// influence that event. The marginal must match the factor's outcomes.
inline EventChain max_entropy_fallback(const EventChain& chain, std::size_t position,
                                       const std::vector<double>& marginal) {
    if (position >= chain.n_events())
        throw InputError("max_entropy_fallback: position " + std::to_string(position) +
                         " out of range");
    std::vector<ChainFactor> factors;
    factors.reserve(chain.n_events());
    for (std::size_t k = 0; k < chain.n_events(); ++k) factors.push_back(chain.factor(k));
    if (marginal.size() != factors[position].outcomes.size())
        throw InputError("max_entropy_fallback: marginal has " +
                         std::to_string(marginal.size()) + " entries but the event has " +
                         std::to_string(factors[position].outcomes.size()) + " outcomes");
    factors[position].table = {marginal};
    factors[position].fallback = true;
    return EventChain(chain.events(), std::move(factors));
}

// Loss attached to each outcome of the chain's final event.
struct LossSpec {
    std::vector<std::string> outcomes;
    std::vector<double> losses;

    double loss_for(const std::string& outcome) const {
        for (std::size_t i = 0; i < outcomes.size(); ++i)
            if (outcomes[i] == outcome) return losses[i];
        throw InputError("LossSpec: no loss assigned to outcome '" + outcome + "'");
    }
};

// Expected loss over the chain's terminal outcomes: sums path probability
// times the loss of the path's final outcome; every terminal outcome must
// carry a loss.
inline double expected_loss(const EventChain& chain, const LossSpec& loss) {
    if (loss.outcomes.size() != loss.losses.size())
        throw InputError("expected_loss: loss spec lengths differ");
    const ChainFactor& last = chain.factor(chain.n_events() - 1);
    std::vector<double> per_outcome(last.outcomes.size());
    for (std::size_t i = 0; i < last.outcomes.size(); ++i)
        per_outcome[i] = loss.loss_for(last.outcomes[i]);
    double total = 0.0;
    for_each_path(chain, [&](const std::vector<std::size_t>& path, double p) {
        total += p * per_outcome[path.back()];
    });
    return total;
}

} // namespace uqkit::chains
