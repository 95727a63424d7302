// Copyright 2026 The avse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Regenerates the frozen files in tests/data. Run only when an intentional
// numeric change lands:  avse_golden_gen <tests/data dir>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "avse/embeddings.h"
#include "avse/masknet.h"
#include "avse/stream.h"
#include "avse/waveform.h"
#include "golden_inputs.h"
#include "oracles.h"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: avse_golden_gen <dir>\n";
    return 1;
  }
  const std::filesystem::path dir = argv[1];
  auto w = std::make_shared<const avse::ModelWeights>(
      avse::MakePresetWeights("tiny"));

  avse::MaskNet net(w);
  avse::NetState s = net.NewState();
  std::vector<float> masks, mask(257);
  for (int t = 0; t < golden::kMaskFrames; ++t) {
    net.PredictMask(s, golden::CompressedFrame(t), golden::VisualFrame(t), mask);
    masks.insert(masks.end(), mask.begin(), mask.end());
  }
  std::ofstream(dir / "masks_tiny.f32", std::ios::binary)
      .write(reinterpret_cast<const char*>(masks.data()), masks.size() * 4);

  // One second: a harmonic target plus noise, stored as float32 so the
  // stored input is exactly what the tests read back.
  auto target = oracle::Harmonic(16000, 1);
  const auto noise = oracle::Noise(16000, 2, 0.1);
  for (size_t i = 0; i < target.size(); ++i)
    target[i] = static_cast<float>(target[i] + noise[i]);
  const avse::Waveform mixture{target, 16000};
  avse::WriteWav(dir / "golden_in.wav", mixture);
  const auto emb = avse::SyntheticEmbeddings(
      static_cast<int>(avse::RequiredVideoFrames(mixture.size())), 512,
      golden::kEnhanceSeed);
  avse::NetworkMaskEstimator est(w);
  const auto out = avse::RunOffline(mixture, emb, est);
  avse::WriteWav(dir / "golden_enhanced.wav", out.enhanced);
  std::cerr << "wrote goldens to " << dir << "\n";
  return 0;
}
