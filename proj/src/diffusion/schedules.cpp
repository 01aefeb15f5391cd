#include <cmath>

#include "cdrdiff/diffusion.hpp"

namespace cdrdiff::diff {

Schedule schedule_from_betas(std::span<const double> betas) {
    if (betas.empty()) throw DiffusionError("schedule needs at least one step");
    Schedule s;
    s.beta.push_back(0.0);
    s.alpha_bar.push_back(1.0);
    double running = 1.0;
    for (double b : betas) {
        if (!(b > 0.0 && b < 1.0)) throw DiffusionError("schedule beta outside (0, 1)");
        running *= 1.0 - b;
        s.beta.push_back(b);
        s.alpha_bar.push_back(running);
    }
    return s;
}

Schedule linear_schedule(std::size_t steps, double beta_first, double beta_last) {
    if (steps == 0) throw DiffusionError("schedule needs at least one step");
    std::vector<double> betas(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        const double f = steps == 1 ? 0.0 : static_cast<double>(t) / static_cast<double>(steps - 1);
        betas[t] = beta_first + (beta_last - beta_first) * f;
    }
    return schedule_from_betas(betas);
}

Schedule sigmoid_schedule(std::size_t steps, double lo, double hi) {
    if (steps == 0) throw DiffusionError("schedule needs at least one step");
    std::vector<double> betas(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        const double f = steps == 1 ? 0.5 : static_cast<double>(t) / static_cast<double>(steps - 1);
        const double x = -6.0 + 12.0 * f;
        betas[t] = lo + (hi - lo) / (1.0 + std::exp(-x));
    }
    return schedule_from_betas(betas);
}

ScheduleSet make_schedules(const ScheduleConfig& config) {
    ScheduleSet s;
    s.steps = config.steps;
    s.type = sigmoid_schedule(config.steps, config.type_beta_min, config.type_beta_max);
    s.pos = linear_schedule(config.steps, config.pos_beta_first, config.pos_beta_last);
    s.ori = linear_schedule(config.steps, config.ori_beta_first, config.ori_beta_last);
    return s;
}

void check_timestep(std::size_t t, const ScheduleSet& s) {
    if (t < 1 || t > s.steps) {
        throw DiffusionError("timestep " + std::to_string(t) + " outside [1, " + std::to_string(s.steps) + "]");
    }
}

}  // namespace cdrdiff::diff
