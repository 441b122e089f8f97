#include "fgfd/refinement.hpp"

#include <cmath>

namespace fgfd {

void TemperatureSchedule::validate() const {
    if (!(initial > 0.0625))
        throw ConfigError("temperature: initial T must exceed 0.0625 so the decay period is positive");
}

void to_json(nlohmann::json& j, const TemperatureSchedule& s) {
    j = {{"initial", s.initial}, {"mode", s.mode == TemperatureMode::literal ? "literal" : "multiplicative"}};
}

void from_json(const nlohmann::json& j, TemperatureSchedule& s) {
    s.initial = j.at("initial").get<double>();
    const auto mode = j.value("mode", std::string("multiplicative"));
    if (mode == "multiplicative")
        s.mode = TemperatureMode::multiplicative;
    else if (mode == "literal")
        s.mode = TemperatureMode::literal;
    else
        throw ConfigError("temperature: unknown mode '" + mode + "'");
}

double temperature_at(const TemperatureSchedule& s, int64_t epoch) {
    s.validate();
    if (epoch < 0) throw ConfigError("temperature: epoch must be >= 0");
    // -log2(0.0625 / T) == 4 + log2(T)
    const double period = -std::log2(0.0625 / s.initial);
    const double decay = std::pow(0.5, static_cast<double>(epoch) / period);
    return s.mode == TemperatureMode::multiplicative ? s.initial * decay : decay;
}

torch::Tensor refinement_loss(const RefinementPair& pair, double temperature, bool detach_teacher) {
    if (!(temperature > 0.0)) throw ConfigError("refinement: temperature must be > 0");
    if (pair.student.sizes() != pair.teacher.sizes() || pair.student.dim() != 2)
        throw ShapeError("refinement: student and teacher logits must both be (B, num_classes)");
    auto teacher = detach_teacher ? pair.teacher.detach() : pair.teacher;
    auto log_student = torch::log_softmax(pair.student / temperature, 1);
    auto log_teacher = torch::log_softmax(teacher / temperature, 1);
    auto p_teacher = log_teacher.exp();
    // xlogy-style: zero teacher mass contributes nothing.
    auto terms = torch::where(p_teacher > 0, p_teacher * (log_teacher - log_student), torch::zeros_like(p_teacher));
    return terms.sum(1).mean();
}

torch::Tensor refinement_loss(std::span<const RefinementPair> pairs, double temperature, bool detach_teacher) {
    if (pairs.empty()) throw ShapeError("refinement: no classifier pairs");
    std::vector<torch::Tensor> terms;
    for (const auto& p : pairs) terms.push_back(refinement_loss(p, temperature, detach_teacher));
    return torch::stack(terms).mean();
}

} // namespace fgfd
