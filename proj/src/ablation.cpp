#include "sgdf/harness/ablation.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "sgdf/harness/trainer.hpp"

namespace sgdf::harness {

std::string to_string(AblationAxis a) {
    switch (a) {
        case AblationAxis::guidance: return "guidance";
        case AblationAxis::encoder_block: return "encoder_block";
        case AblationAxis::components: return "components";
        case AblationAxis::propagation: return "propagation";
        case AblationAxis::fusion: return "fusion";
        case AblationAxis::nsa_window: return "nsa_window";
        case AblationAxis::block_count: return "block_count";
    }
    throw std::logic_error("unreachable ablation axis");
}

AblationAxis ablation_axis_from_string(const std::string& s) {
    if (s == "guidance") return AblationAxis::guidance;
    if (s == "encoder_block") return AblationAxis::encoder_block;
    if (s == "components") return AblationAxis::components;
    if (s == "propagation") return AblationAxis::propagation;
    if (s == "fusion") return AblationAxis::fusion;
    if (s == "nsa_window") return AblationAxis::nsa_window;
    if (s == "block_count") return AblationAxis::block_count;
    throw std::invalid_argument("unknown ablation axis: " + s);
}

void apply_axis_value(model::ModelConfig& cfg, DatasetSpec& data, AblationAxis axis,
                      const std::string& value) {
    switch (axis) {
        case AblationAxis::guidance:
            if (value == "on") data.self_guidance = false;
            else if (value == "off") data.self_guidance = true;
            else throw std::invalid_argument("guidance axis takes on|off, got " + value);
            return;
        case AblationAxis::encoder_block:
            cfg.encoder.block = model::block_kind_from_string(value);
            return;
        case AblationAxis::components:
            if (value == "vanilla+add") {
                cfg.attention = model::AttentionKind::vanilla;
                cfg.fusion.kind = model::FusionKind::add;
            } else if (value == "nrca+add") {
                cfg.attention = model::AttentionKind::nrca;
                cfg.fusion.kind = model::FusionKind::add;
            } else if (value == "vanilla+svff") {
                cfg.attention = model::AttentionKind::vanilla;
                cfg.fusion.kind = model::FusionKind::svff;
            } else if (value == "full") {
                cfg.attention = model::AttentionKind::nrca;
                cfg.fusion.kind = model::FusionKind::svff;
            } else {
                throw std::invalid_argument("unknown components value: " + value);
            }
            return;
        case AblationAxis::propagation:
            cfg.propagation = model::propagation_kind_from_string(value);
            return;
        case AblationAxis::fusion:
            cfg.fusion.kind = model::fusion_kind_from_string(value);
            return;
        case AblationAxis::nsa_window:
            cfg.nsa_window = std::stoi(value);
            return;
        case AblationAxis::block_count:
            cfg.num_blocks = std::stoi(value);
            return;
    }
    throw std::logic_error("unreachable ablation axis");
}

std::string AblationTable::csv() const {
    std::ostringstream os;
    os << "axis,value,seed,params,psnr_db,ssim,status\n";
    for (const auto& r : rows) {
        os << r.axis << ',' << r.value << ',' << r.seed << ',' << r.param_count << ',';
        if (r.failed) os << ",,failed: " << r.error;
        else os << r.psnr << ',' << r.ssim << ",ok";
        os << '\n';
    }
    return os.str();
}

std::string AblationTable::text() const {
    std::ostringstream os;
    os << "axis\tvalue\tseed\tparams\tpsnr_db\tssim\n";
    for (const auto& r : rows) {
        os << r.axis << '\t' << r.value << '\t' << r.seed << '\t' << r.param_count << '\t';
        if (r.failed) os << "FAILED: " << r.error;
        else os << r.psnr << '\t' << r.ssim;
        os << '\n';
    }
    return os.str();
}

double AblationTable::mean_psnr(const std::string& value) const {
    double sum = 0.0;
    int n = 0;
    for (const auto& r : rows)
        if (!r.failed && r.value == value) {
            sum += r.psnr;
            ++n;
        }
    return n ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

AblationTable run_ablation(const AblationSpec& spec, const std::string& out_dir) {
    if (spec.values.empty()) throw std::invalid_argument("ablation spec lists no values");
    if (spec.seeds.empty()) throw std::invalid_argument("ablation spec lists no seeds");
    AblationTable table;
    for (const auto& value : spec.values) {
        for (const std::uint64_t seed : spec.seeds) {
            AblationRow row;
            row.axis = to_string(spec.axis);
            row.value = value;
            row.seed = seed;
            try {
                model::ModelConfig cfg = spec.base;
                DatasetSpec data = spec.dataset;
                apply_axis_value(cfg, data, spec.axis, value);
                cfg.validate();
                row.param_count = model::count_params(cfg);

                std::string clean_value = value;
                for (auto& ch : clean_value)
                    if (ch == '+') ch = '_';
                const std::string run_dir = out_dir + "/" + row.axis + "_" + clean_value +
                                            "_s" + std::to_string(seed);
                TrainResult res = train(cfg, spec.schedule, data, seed, run_dir);
                const metrics::MetricReport rep =
                    evaluate(&res.model, held_out(data), spec.eval);
                row.psnr = rep.mean_psnr;
                row.ssim = rep.mean_ssim;
            } catch (const std::exception& e) {
                row.failed = true;
                row.error = e.what();
            }
            table.rows.push_back(row);
        }
    }
    return table;
}

std::vector<AblationSpec> ablation_presets() {
    AblationSpec base;
    base.base = model::ModelConfig::ablation();
    base.schedule = TrainSchedule::toy();
    base.schedule.iterations = 300;
    base.schedule.patch_h = 32;
    base.schedule.patch_w = 64;
    base.schedule.batch_size = 2;
    base.dataset = DatasetSpec{};
    base.dataset.height = 48;
    base.dataset.width = 96;
    base.dataset.max_disparity = base.base.max_disparity / 2;
    base.eval.alpha = 0.02;
    base.eval.sigma = 0.2;
    base.eval.num_images = 6;
    base.seeds = {1, 2, 3};

    std::vector<AblationSpec> specs;
    auto push = [&](AblationAxis axis, std::vector<std::string> values) {
        AblationSpec s = base;
        s.axis = axis;
        s.values = std::move(values);
        specs.push_back(std::move(s));
    };
    push(AblationAxis::guidance, {"on", "off"});
    push(AblationAxis::encoder_block, {"naf", "res"});
    push(AblationAxis::components, {"vanilla+add", "nrca+add", "vanilla+svff", "full"});
    push(AblationAxis::propagation, {"nsa", "conv"});
    push(AblationAxis::fusion, {"svff", "add", "concat", "attention"});
    push(AblationAxis::nsa_window, {"3", "5", "7"});
    push(AblationAxis::block_count, {"1", "2", "3", "4"});
    return specs;
}

}  // namespace sgdf::harness
