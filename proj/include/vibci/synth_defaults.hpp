#pragma once

// Default constants of the synthetic EEG surrogate. Every value here is an
// invented stand-in for the unavailable recordings; experiments that need
// different numbers override them through the pipeline config file.

#include <array>
#include <string_view>
#include <utility>

#include "vibci/synthgen.hpp"

namespace vibci::synth_defaults {

inline constexpr double kFsHz = 1000.0;
inline constexpr std::size_t kTrialsPerClass = 50;
inline constexpr double kEpochLenS = 4.0;
inline constexpr double kRestLenS = 4.0;
inline constexpr double kSnr = 2.0;
inline constexpr double kBackgroundRmsUv = 10.0;
inline constexpr double kLeadInS = 1.0;
inline constexpr double kTailS = 1.0;
inline constexpr double kRampS = 0.25;
inline constexpr double kAmpJitter = 0.2;        // multiplier in [1 - j, 1 + j]
inline constexpr double kFreqJitterHz = 0.25;   // offset in [-j, j]
inline constexpr std::array<double, 4> kBackgroundCornersHz = {0.5, 2.0, 8.0, 32.0};

// Occipital alpha generators.
inline constexpr std::array<std::pair<std::string_view, double>, 13> kAlphaTopography = {{
    {"Oz", 1.0}, {"O1", 1.0}, {"O2", 1.0}, {"Iz", 1.0}, {"POz", 1.0},
    {"PO3", 0.5}, {"PO4", 0.5}, {"PO7", 0.5}, {"PO8", 0.5},
    {"Pz", 0.2}, {"P1", 0.2}, {"P2", 0.2}, {"P3", 0.1},
}};

// Prefrontal delta generators.
inline constexpr std::array<std::pair<std::string_view, double>, 11> kDeltaTopography = {{
    {"Fp1", 1.0}, {"Fp2", 1.0}, {"AFz", 1.0}, {"AF3", 1.0}, {"AF4", 1.0},
    {"AF7", 0.5}, {"AF8", 0.5},
    {"Fz", 0.2}, {"F1", 0.2}, {"F2", 0.2}, {"F3", 0.1},
}};

// PourWater, OpenDoor, EatFood, PickUpPhone.
inline constexpr std::array<ClassSignature, 4> kClassSignatures = {{
    {8.5, 1.0, 1.0, 1.0},
    {9.75, 1.75, 0.7, 1.3},
    {11.0, 2.5, 1.3, 0.7},
    {12.25, 3.25, 0.85, 0.85},
}};

}  // namespace vibci::synth_defaults
