// Copyright (c) 2026, the caw-reader authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace caw {

inline constexpr const char* kVersion = "caw-reader 0.1.0";

}  // namespace caw
