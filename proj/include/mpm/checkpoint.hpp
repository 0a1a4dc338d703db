#pragma once

#include "mpm/adjoint.hpp"

namespace mpm {

// Segmented checkpointing schedule: the forward pass stores the state at
// each segment start only; the backward pass replays one segment at a time,
// dropping memory from O(N_t) to O(N_t/n) plus the checkpoint slots.
struct CheckpointPlan {
    Index total_steps = 0;
    int n_segments = 1;
    std::vector<Index> boundaries; // n_segments + 1 entries, 0 .. total_steps

    static CheckpointPlan make(Index total_steps, int n_segments)
    {
        if (total_steps < 1)
            throw ValidationError("checkpoint plan: need at least one step");
        if (n_segments < 1 || Index(n_segments) > total_steps)
            throw ValidationError("checkpoint plan: n_segments must lie in [1, N_t]");
        CheckpointPlan plan;
        plan.total_steps = total_steps;
        plan.n_segments = n_segments;
        plan.boundaries.resize(static_cast<std::size_t>(n_segments) + 1);
        Index base = total_steps / n_segments;
        Index rem = total_steps % n_segments;
        Index at = 0;
        plan.boundaries[0] = 0;
        for (int k = 0; k < n_segments; ++k) {
            at += base + (k < rem ? 1 : 0); // segment lengths differ by <= 1
            plan.boundaries[static_cast<std::size_t>(k) + 1] = at;
        }
        return plan;
    }

    Index segment_length(int k) const
    {
        return boundaries[static_cast<std::size_t>(k) + 1] - boundaries[static_cast<std::size_t>(k)];
    }

    Index max_segment_length() const
    {
        Index m = 0;
        for (int k = 0; k < n_segments; ++k)
            m = std::max(m, segment_length(k));
        return m;
    }

    // checkpoint slots + segment replay buffer (segment length + 1 states)
    Index planned_peak_states() const { return Index(n_segments) + max_segment_length() + 1; }
};

template <class T, int dim>
struct BackpropResult {
    StateCotangent<T, dim> initial_state_cot;
    ParamGrads<T, dim> param_grads;
    T loss = T(0);
    Index checkpoints_stored = 0;
    Index peak_replay_states = 0;
    Index measured_peak_states() const { return checkpoints_stored + peak_replay_states; }
};

// Seeder interface (duck-typed): the loss attachment along the trajectory.
//   bool observes(Index step)
//   T loss_at(Index step, const SimState&)
//   void seed(Index step, const SimState&, StateCotangent&)   (accumulates)
//
// Reverse-mode differentiation of a trajectory of plan.total_steps steps
// from `initial`. Returns dL/d(state_0) plus the accumulated trajectory
// parameter gradients; the result is independent of the segment count
// because every kernel (forward and transposed) is deterministic.
template <class T, int dim, class Seeder>
BackpropResult<T, dim> backprop_trajectory(const Scene<T, dim>& scene, const SimState<T, dim>& initial,
                                           const CheckpointPlan& plan, Seeder&& seeder)
{
    const int nseg = plan.n_segments;
    BackpropResult<T, dim> result;

    // forward sweep: checkpoints at segment starts, hash at every boundary
    std::vector<SimState<T, dim>> checkpoints;
    checkpoints.reserve(static_cast<std::size_t>(nseg));
    std::vector<std::uint64_t> boundary_hash(static_cast<std::size_t>(nseg) + 1);
    {
        SimState<T, dim> s = initial;
        Stepper<T, dim> stepper(scene);
        if (seeder.observes(0))
            result.loss += seeder.loss_at(0, s);
        for (int k = 0; k < nseg; ++k) {
            boundary_hash[static_cast<std::size_t>(k)] = s.hash();
            checkpoints.push_back(s);
            for (Index t = plan.boundaries[static_cast<std::size_t>(k)];
                 t < plan.boundaries[static_cast<std::size_t>(k) + 1]; ++t) {
                stepper.advance(s);
                if (seeder.observes(t + 1))
                    result.loss += seeder.loss_at(t + 1, s);
            }
        }
        boundary_hash[static_cast<std::size_t>(nseg)] = s.hash();
    }
    result.checkpoints_stored = Index(checkpoints.size());

    // backward sweep
    StateCotangent<T, dim> cot = StateCotangent<T, dim>::zeros_like(initial.particles);
    StateCotangent<T, dim> cot_prev = cot;
    result.param_grads = ParamGrads<T, dim>::zeros_like(scene.boundary);
    AdjointWorkspace<T, dim> ws;
    ws.configure(scene);

    std::vector<SimState<T, dim>> replay;
    for (int k = nseg - 1; k >= 0; --k) {
        Index b0 = plan.boundaries[static_cast<std::size_t>(k)];
        Index b1 = plan.boundaries[static_cast<std::size_t>(k) + 1];
        replay.clear();
        replay.reserve(static_cast<std::size_t>(b1 - b0) + 1);
        replay.push_back(checkpoints[static_cast<std::size_t>(k)]);
        {
            Stepper<T, dim> stepper(scene);
            SimState<T, dim> s = replay.front();
            for (Index t = b0; t < b1; ++t) {
                stepper.advance(s);
                replay.push_back(s);
            }
        }
        if (replay.back().hash() != boundary_hash[static_cast<std::size_t>(k) + 1])
            throw NumericalError("checkpoint mismatch: recomputed segment end differs from the "
                                 "recorded state at step " + std::to_string(b1));
        result.peak_replay_states = std::max(result.peak_replay_states, Index(replay.size()));

        for (Index t = b1; t > b0; --t) {
            const SimState<T, dim>& s_t = replay[static_cast<std::size_t>(t - b0)];
            const SimState<T, dim>& s_prev = replay[static_cast<std::size_t>(t - b0) - 1];
            if (seeder.observes(t))
                seeder.seed(t, s_t, cot);
            step_vjp(scene, s_prev, cot, cot_prev, result.param_grads, ws);
            std::swap(cot, cot_prev);
        }
    }
    if (seeder.observes(0))
        seeder.seed(0, initial, cot);

    result.initial_state_cot = std::move(cot);
    return result;
}

} // namespace mpm
