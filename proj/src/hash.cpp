// Copyright 2026 The proofopt Authors
// SPDX-License-Identifier: Apache-2.0

#include <openssl/evp.h>

#include <array>
#include <cstdio>

#include "text_util.hpp"

namespace proofopt::text {

std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr);
    std::string out;
    out.reserve(len * 2);
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof(buf), "%02x", digest[i]);
        out += buf;
    }
    return out;
}

}  // namespace proofopt::text
