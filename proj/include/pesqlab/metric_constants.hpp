#pragma once

// Calibration table for the quality metric. Every tunable constant of the
// pipeline lives here. Band tables are the 16 kHz wideband values of ITU-T
// P.862 (49 Bark bands over a 512-point spectrum).

#include <array>
#include <cstddef>

namespace pesqlab::constants {

inline constexpr std::size_t kBarkBands = 49;
inline constexpr std::size_t kFrameSize = 512;  // 32 ms at 16 kHz
inline constexpr std::size_t kFrameHop = 256;   // 50% overlap

// Level alignment.
inline constexpr double kTargetLevel = 1e7;
inline constexpr double kPercentileFraction = 0.85;
inline constexpr double kBandpassLowHz = 325.0;
inline constexpr double kBandpassHighHz = 3250.0;

// FFT bins pooled into each Bark band, starting at bin 0 (bin 0 itself is
// discarded before pooling).
inline constexpr std::array<int, kBarkBands> kBinsPerBand = {
    1, 1, 1, 1, 1, 1, 1, 1, 2, 1, 1, 1, 1, 1, 2, 1, 1, 2, 2, 2, 2, 2, 2, 2, 2,
    3, 3, 3, 3, 4, 3, 4, 5, 4, 5, 6, 6, 7, 8, 9, 9, 12, 12, 15, 16, 18, 21, 25, 20};

inline constexpr std::array<double, kBarkBands> kBandWidthBark = {
    0.157344, 0.317994, 0.322441, 0.326934, 0.331474, 0.336061, 0.340697, 0.345381,
    0.350114, 0.354897, 0.359729, 0.364611, 0.369544, 0.374529, 0.379565, 0.384653,
    0.389794, 0.394989, 0.400236, 0.405538, 0.410894, 0.416306, 0.421773, 0.427297,
    0.432877, 0.438514, 0.444209, 0.449962, 0.455774, 0.461645, 0.467577, 0.473569,
    0.479621, 0.485736, 0.491912, 0.498151, 0.504454, 0.510819, 0.517250, 0.523745,
    0.530308, 0.536934, 0.543629, 0.550390, 0.557220, 0.564119, 0.571085, 0.578125,
    0.585232};

// Per-band power density correction, multiplied by kPowerScale.
inline constexpr std::array<double, kBarkBands> kPowerDensityCorrection = {
    100.000000, 99.999992, 100.000000, 100.000008, 100.000008, 100.000015, 99.999992,
    99.999969,  50.000027, 100.000000, 99.999969,  100.000015, 99.999947,  100.000061,
    53.047077,  110.000046, 117.991989, 65.000000, 68.760147,  69.999931,  71.428818,
    75.000038,  76.843384, 80.968781,  88.646126,  63.864388,  68.155350,  72.547775,
    75.584831,  58.379192, 80.950836,  64.135651,  54.384785,  73.821884,  64.437073,
    59.176456,  65.521278, 61.399822,  58.144047,  57.004543,  64.126297,  54.311001,
    61.114979,  55.077751, 56.849335,  55.628868,  53.137054,  54.985844,  79.546974};
inline constexpr double kPowerScale = 6.910853e-006;

// Absolute hearing threshold per band (power).
inline constexpr std::array<double, kBarkBands> kAbsThresholdPower = {
    51286152.000000, 2454709.500000, 70794.593750, 4897.788574, 1174.897705, 389.045166,
    104.712860,      45.708820,      17.782795,    9.772372,    4.897789,    3.090296,
    1.905461,        1.258925,       0.977237,     0.724436,    0.562341,    0.457088,
    0.389045,        0.331131,       0.295121,     0.269153,    0.257040,    0.251189,
    0.251189,        0.251189,       0.251189,     0.263027,    0.288403,    0.309030,
    0.338844,        0.371535,       0.398107,     0.436516,    0.467735,    0.489779,
    0.501187,        0.501187,       0.512861,     0.524807,    0.524807,    0.524807,
    0.512861,        0.478630,       0.426580,     0.371535,    0.363078,    0.416869,
    0.537032};

// Zwicker loudness.
inline constexpr double kZwickerPower = 0.23;
inline constexpr double kLoudnessScale = 1.866055e-001;

// Partial compensation of the reference/degraded transfer function.
inline constexpr double kSilentFrameThresholdFactor = 1e2;  // x hearing threshold
inline constexpr double kSilentFramePower = 1e7;
inline constexpr double kBandAverageThresholdFactor = 1e2;
inline constexpr double kBandRatioOffset = 1000.0;
inline constexpr double kBandRatioMin = 0.01;
inline constexpr double kBandRatioMax = 100.0;
inline constexpr double kFrameRatioOffset = 5e3;
inline constexpr double kFrameRatioSmoothing = 0.2;  // weight of previous frame
inline constexpr double kFrameRatioMin = 3e-4;
inline constexpr double kFrameRatioMax = 5.0;

// Disturbance.
inline constexpr double kDeadzoneFraction = 0.25;
inline constexpr double kAsymmetryOffset = 50.0;
inline constexpr double kAsymmetryExponent = 1.2;
inline constexpr double kAsymmetryFloor = 3.0;
inline constexpr double kAsymmetryCap = 12.0;
inline constexpr double kFrameWeightOffset = 1e5;
inline constexpr double kFrameWeightScale = 1e7;
inline constexpr double kFrameWeightExponent = 0.04;
inline constexpr double kFrameDisturbanceCap = 45.0;
inline constexpr double kDisturbanceFloor = 1e-20;

// Time aggregation: L6 over syllabic windows of 20 frames (320 ms) with a
// stride of 10 frames, then L2 over windows.
inline constexpr std::size_t kSyllableFrames = 20;
inline constexpr std::size_t kSyllableStride = 10;
inline constexpr double kSyllableNorm = 6.0;

// MOS.
inline constexpr double kRawMosOffset = 4.5;
inline constexpr double kSymmetricWeight = 0.1;
inline constexpr double kAsymmetricWeight = 0.0309;
inline constexpr double kLqoFloor = 0.999;
inline constexpr double kLqoCeiling = 4.999;
inline constexpr double kLqoSlope = 1.3669;
inline constexpr double kLqoOffset = 3.8224;

// Support: recommended minimum active speech in the reference.
inline constexpr double kMinActiveSpeechSeconds = 3.2;

}  // namespace pesqlab::constants
