// Copyright 2026 The TimbreLab Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Bin -> piano-key assignment for a 4096-point FFT at 44.1 kHz, computed
// offline by scanning all 88 keys per bin for a [-50, +50) cent match and
// frozen here as run-length triples {note (-1 = none), first_bin, last_bin}.

#pragma once

#include <array>

namespace timbrelab::testing {

struct BinRun {
  int note;
  int first_bin;
  int last_bin;
};

inline constexpr std::array<BinRun, 71> kBinNoteRuns = {{
    {-1, 0, 2},
    {3, 3, 3},
    {8, 4, 4},
    {12, 5, 5},
    {15, 6, 6},
    {17, 7, 7},
    {20, 8, 8},
    {22, 9, 9},
    {24, 10, 10},
    {25, 11, 11},
    {27, 12, 12},
    {28, 13, 13},
    {29, 14, 14},
    {31, 15, 15},
    {32, 16, 16},
    {33, 17, 17},
    {34, 18, 18},
    {35, 19, 19},
    {36, 20, 21},
    {37, 22, 22},
    {38, 23, 23},
    {39, 24, 25},
    {40, 26, 26},
    {41, 27, 28},
    {42, 29, 29},
    {43, 30, 31},
    {44, 32, 33},
    {45, 34, 35},
    {46, 36, 37},
    {47, 38, 39},
    {48, 40, 42},
    {49, 43, 44},
    {50, 45, 47},
    {51, 48, 50},
    {52, 51, 52},
    {53, 53, 56},
    {54, 57, 59},
    {55, 60, 63},
    {56, 64, 66},
    {57, 67, 70},
    {58, 71, 74},
    {59, 75, 79},
    {60, 80, 84},
    {61, 85, 89},
    {62, 90, 94},
    {63, 95, 100},
    {64, 101, 105},
    {65, 106, 112},
    {66, 113, 118},
    {67, 119, 126},
    {68, 127, 133},
    {69, 134, 141},
    {70, 142, 149},
    {71, 150, 158},
    {72, 159, 168},
    {73, 169, 178},
    {74, 179, 188},
    {75, 189, 200},
    {76, 201, 211},
    {77, 212, 224},
    {78, 225, 237},
    {79, 238, 252},
    {80, 253, 267},
    {81, 268, 282},
    {82, 283, 299},
    {83, 300, 317},
    {84, 318, 336},
    {85, 337, 356},
    {86, 357, 377},
    {87, 378, 400},
    {-1, 401, 2048},
}};

}  // namespace timbrelab::testing
