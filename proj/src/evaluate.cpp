#include "sgdf/harness/evaluate.hpp"

#include <algorithm>
#include <string>

#include "sgdf/core/rng.hpp"
#include "sgdf/noise/noise_sim.hpp"

namespace sgdf::harness {

namespace {

Image clip01(const Image& in) {
    Image out(in.shape());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::clamp(in[i], 0.0f, 1.0f);
    return out;
}

}  // namespace

metrics::MetricReport evaluate(model::Sgdformer* m, const DatasetSpec& data,
                               const EvalSpec& spec) {
    data.validate();
    if (m && data.channels > 1)
        model::resolve_pairing(m->config, data.channels, data.channels);

    metrics::MetricReport report;
    for (int i = 0; i < spec.num_images; ++i) {
        const data::ImagePair pair = data::synthesize_pair(scene_for(data, i));
        noise::NoiseParams np;
        np.alpha = spec.alpha;
        np.sigma = spec.sigma;
        np.seed = core::derive_seed(spec.seed, 0xE7A1, static_cast<std::uint64_t>(i));
        const Image noisy = noise::degrade(pair.target, np);
        const Image& guidance = data.self_guidance ? noisy : pair.guidance;

        const Image restored = m ? clip01(model::denoise_image(*m, noisy, guidance))
                                 : clip01(noisy);
        metrics::ImageMetrics im;
        im.id = "synth" + std::to_string(i);
        im.psnr = metrics::psnr(restored, pair.clean_target);
        im.ssim = metrics::ssim(restored, pair.clean_target);
        report.per_image.push_back(im);
    }
    report.finalize();
    return report;
}

}  // namespace sgdf::harness
