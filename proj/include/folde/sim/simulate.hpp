#pragma once

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "folde/sim/campaign.hpp"
#include "folde/sim/results.hpp"

namespace folde {

struct SimJob {
    Policy policy;
    std::size_t replicate;
};

// Runs every (policy, replicate) campaign on `threads` workers. Each job's
// randomness depends only on (seed, replicate), so output order and content
// are independent of scheduling.
inline std::vector<ReplicateResult> simulate(const SimInputs& inputs, const SimConfig& config,
                                             std::span<const Policy> policies, std::size_t threads = 1) {
    config.validate();
    std::vector<SimJob> jobs;
    for (auto p : policies)
        for (std::size_t r = 0; r < config.replicates; ++r) jobs.push_back({p, r});
    std::vector<ReplicateResult> results(jobs.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto worker = [&] {
        while (true) {
            const std::size_t j = next.fetch_add(1);
            if (j >= jobs.size()) return;
            try {
                SimConfig cfg = config;
                cfg.policy = jobs[j].policy;
                cfg.ensemble.parallel = false;
                results[j] = {inputs.target, jobs[j].policy, jobs[j].replicate,
                              run_campaign(inputs, cfg, jobs[j].replicate).rounds};
            } catch (...) {
                std::lock_guard lock(failure_mu);
                if (!failure) failure = std::current_exception();
                next = jobs.size();
            }
        }
    };
    threads = std::max<std::size_t>(1, std::min(threads, jobs.size()));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    return results;
}

inline std::vector<ResultRow> result_rows(std::span<const ReplicateResult> results) {
    std::vector<ResultRow> rows;
    for (const auto& r : results) {
        auto part = to_rows(r);
        rows.insert(rows.end(), part.begin(), part.end());
    }
    return rows;
}

}  // namespace folde
