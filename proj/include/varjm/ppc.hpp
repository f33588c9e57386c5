#pragma once

#include "varjm/data.hpp"
#include "varjm/model.hpp"
#include "varjm/sampler.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace varjm {

struct PpcResult {
  Matrix outcome_replicates;   // n_rep x N simulated outcomes
  Matrix trajectory_pvalues;   // N x Q
  std::vector<std::size_t> draws;  // pooled draw index behind each replicate
};

/// n_rep evenly spaced indices into the draws of all chains pooled in order.
/// Throws ModelError if fewer than n_rep draws are stored.
std::vector<std::size_t> thin_draws(const std::vector<ChainOutput>& chains, int n_rep);

/// One simulated outcome vector per thinned draw, at that draw's eta and
/// scale. The mixture family draws component membership per replicate.
Matrix ppc_outcome(const std::vector<ChainOutput>& chains, const Dataset& data, const ModelSpec& spec,
                   int n_rep = 1000, std::uint64_t seed = 1);

/// Per subject and marker, the fraction of thinned draws with
/// T(observed) < T(replicated), ties counting 1/2, where
/// T = sum_j (x_ijq - b_iq1 - b_iq2 t_ij)^2 / d_iq^2 at the draw's values.
/// Replicated series are drawn jointly across markers from N_Q(mu, S_i).
Matrix ppc_trajectory_pvalues(const std::vector<ChainOutput>& chains, const Dataset& data,
                              const ModelSpec& spec, int n_rep = 1000, std::uint64_t seed = 1);

PpcResult run_ppc(const std::vector<ChainOutput>& chains, const Dataset& data, const ModelSpec& spec,
                  int n_rep = 1000, std::uint64_t seed = 1);

/// Columns draw,subject,y_rep.
void write_ppc_outcome_csv(const std::filesystem::path& path, const PpcResult& result, const Dataset& data);
/// Columns subject,marker,pvalue.
void write_ppc_pvalues_csv(const std::filesystem::path& path, const Matrix& pvalues, const Dataset& data);

}  // namespace varjm
