#include <cmath>

#include "vts/training.hpp"

namespace vts::training {

void ScheduleConfig::validate() const {
    if (eta_min > eta_max)
        throw InvalidConfiguration("schedule: eta_min > eta_max");
    if (t0 < 1) throw InvalidConfiguration("schedule: T0 must be >= 1");
    if (tmult < 1) throw InvalidConfiguration("schedule: Tmult must be >= 1");
    if (warmup_epochs < 0)
        throw InvalidConfiguration("schedule: negative warmup");
}

Real lr_at(long step, int epoch_len, const ScheduleConfig& s) {
    s.validate();
    if (step < 0) throw InvalidArgument("lr_at: negative step");
    if (epoch_len < 1) throw InvalidArgument("lr_at: epoch_len must be >= 1");
    long warmup_steps = static_cast<long>(s.warmup_epochs) * epoch_len;
    if (step < warmup_steps)
        return s.eta_max * static_cast<Real>(step) / warmup_steps;
    // epochs since warmup, fractional at step resolution
    Real t_cur = static_cast<Real>(step - warmup_steps) / epoch_len;
    Real t_i = static_cast<Real>(s.t0);
    while (t_cur >= t_i) {
        t_cur -= t_i;
        t_i *= s.tmult;
    }
    return s.eta_min + 0.5 * (s.eta_max - s.eta_min) *
                           (1.0 + std::cos(M_PI * t_cur / t_i));
}

}  // namespace vts::training
