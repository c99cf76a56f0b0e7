#pragma once

#include <algorithm>
#include <vector>

#include "spixseg/nn/layers.hpp"

namespace spixseg::nn {

// Fixed chunk count keeps gradient summation order (and therefore results)
// independent of the number of worker threads.
constexpr int kGradChunks = 8;

template <typename T>
struct BatchContext {
  std::vector<GradBuf<T>> chunk_grads;
  std::vector<Workspace<T>> ws;
  GradBuf<T> total;

  explicit BatchContext(const ParamStore<T>& ps) {
    for (int i = 0; i < kGradChunks; ++i) {
      chunk_grads.push_back(ps.zero_grads());
      ws.emplace_back();
    }
    total = ps.zero_grads();
  }
};

/// Runs fn(item, grads, workspace) for items [0,n) split over fixed chunks,
/// merges chunk gradients in chunk order, returns the summed loss.
template <typename T, typename F>
double run_batch(BatchContext<T>& ctx, int n, F&& fn) {
  double chunk_loss[kGradChunks] = {0};
  const int per = (n + kGradChunks - 1) / kGradChunks;
#pragma omp parallel for schedule(static, 1)
  for (int c = 0; c < kGradChunks; ++c) {
    reset_grads(ctx.chunk_grads[static_cast<std::size_t>(c)]);
    const int lo = c * per;
    const int hi = std::min(n, lo + per);
    double loss = 0.0;
    for (int i = lo; i < hi; ++i) {
      loss += fn(i, ctx.chunk_grads[static_cast<std::size_t>(c)],
                 ctx.ws[static_cast<std::size_t>(c)]);
    }
    chunk_loss[c] = loss;
  }
  reset_grads(ctx.total);
  double loss = 0.0;
  for (int c = 0; c < kGradChunks; ++c) {
    accumulate_grads(ctx.total, ctx.chunk_grads[static_cast<std::size_t>(c)]);
    loss += chunk_loss[c];
  }
  return loss;
}

}  // namespace spixseg::nn
