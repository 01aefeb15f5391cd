#include <cmath>
#include <sstream>

#include "cdrdiff/training.hpp"

namespace cdrdiff::diff {

std::size_t sample_timestep(const ScheduleSet& s, Rng& rng) {
    std::uniform_int_distribution<std::size_t> dist(1, s.steps);
    return dist(rng);
}

Trainer::Trainer(nn::DenoiserModel& model, ScheduleSet schedules, TrainConfig config,
                 std::vector<TrainingExample> examples)
    : model_(model),
      schedules_(std::move(schedules)),
      config_(config),
      examples_(std::move(examples)),
      adam_(make_adam_state(model.params())) {
    if (examples_.empty()) throw TrainingError("no training examples");
    if (config_.batch_size == 0) throw TrainingError("batch size must be positive");
}

void Trainer::resume(AdamState adam, std::size_t steps_done) {
    adam_ = std::move(adam);
    step_ = steps_done;
}

StepReport Trainer::step() {
    const std::size_t batch = config_.batch_size;
    Rng data = make_stream(config_.seed, "data", step_);
    std::uniform_int_distribution<std::size_t> pick(0, examples_.size() - 1);
    std::vector<std::size_t> items(batch);
    for (auto& i : items) i = pick(data);

    std::vector<GradientSet> grads(batch);
    std::vector<LossBreakdown> losses(batch);
    std::vector<std::size_t> timesteps(batch);
    const auto run_item = [&](std::size_t b) {
        Rng rng = make_stream(config_.seed, "diffusion", step_ * batch + b);
        timesteps[b] = sample_timestep(schedules_, rng);
        ad::Graph g(&model_.params());
        const LossTerms terms = denoising_loss(g, model_, examples_[items[b]], timesteps[b], schedules_, rng);
        losses[b] = terms.values();
        grads[b] = g.backward(terms.total);
    };
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (batch > 1)
#endif
    for (std::size_t b = 0; b < batch; ++b) run_item(b);

    StepReport report;
    report.step = step_ + 1;
    GradientSet total = zero_gradients(model_.params());
    for (std::size_t b = 0; b < batch; ++b) {
        if (!std::isfinite(losses[b].total)) {
            std::ostringstream msg;
            msg << "non-finite loss at step " << report.step << " on example '" << examples_[items[b]].id
                << "' at t = " << timesteps[b] << " (type " << losses[b].type << ", pos " << losses[b].pos
                << ", ori " << losses[b].ori << ")";
            throw TrainingError(msg.str());
        }
        accumulate(total, grads[b]);
        report.loss.type += losses[b].type;
        report.loss.pos += losses[b].pos;
        report.loss.ori += losses[b].ori;
        report.loss.total += losses[b].total;
    }
    const double inv = 1.0 / static_cast<double>(batch);
    scale(total, inv);
    report.loss.type *= inv;
    report.loss.pos *= inv;
    report.loss.ori *= inv;
    report.loss.total *= inv;
    report.grad_norm = gradient_norm(total);
    adam_step(model_.params(), total, adam_, config_.adam);
    ++step_;
    return report;
}

}  // namespace cdrdiff::diff
