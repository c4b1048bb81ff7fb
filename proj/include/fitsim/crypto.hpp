#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <optional>

#include "fitsim/bytes.hpp"

// ChaCha20-Poly1305 AEAD (RFC 8439 construction). The session protocol needs
// an authenticated cipher with 256-bit keys: ciphertexts must fail cleanly on
// any modification or wrong key rather than decrypt to garbage. Implemented
// here because the build carries no crypto dependency; validated in
// tests/test_crypto.cpp against fixed reference vectors.

namespace fitsim::crypto {

inline constexpr std::size_t kKeyLen = 32;
inline constexpr std::size_t kNonceLen = 12;
inline constexpr std::size_t kTagLen = 16;

using Key = std::array<std::uint8_t, kKeyLen>;
using Nonce = std::array<std::uint8_t, kNonceLen>;

namespace detail {

inline std::uint32_t rotl(std::uint32_t v, int n) { return (v << n) | (v >> (32 - n)); }

inline std::uint32_t load_le32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void store_le32(std::uint8_t* p, std::uint32_t v) {
    p[0] = static_cast<std::uint8_t>(v);
    p[1] = static_cast<std::uint8_t>(v >> 8);
    p[2] = static_cast<std::uint8_t>(v >> 16);
    p[3] = static_cast<std::uint8_t>(v >> 24);
}

inline void quarter_round(std::uint32_t& a, std::uint32_t& b, std::uint32_t& c, std::uint32_t& d) {
    a += b; d ^= a; d = rotl(d, 16);
    c += d; b ^= c; b = rotl(b, 12);
    a += b; d ^= a; d = rotl(d, 8);
    c += d; b ^= c; b = rotl(b, 7);
}

inline void chacha20_block(const Key& key, std::uint32_t counter, const Nonce& nonce,
                           std::uint8_t out[64]) {
    std::uint32_t st[16];
    st[0] = 0x61707865; st[1] = 0x3320646e; st[2] = 0x79622d32; st[3] = 0x6b206574;
    for (int i = 0; i < 8; ++i) st[4 + i] = load_le32(key.data() + 4 * i);
    st[12] = counter;
    for (int i = 0; i < 3; ++i) st[13 + i] = load_le32(nonce.data() + 4 * i);

    std::uint32_t w[16];
    std::memcpy(w, st, sizeof w);
    for (int round = 0; round < 10; ++round) {
        quarter_round(w[0], w[4], w[8], w[12]);
        quarter_round(w[1], w[5], w[9], w[13]);
        quarter_round(w[2], w[6], w[10], w[14]);
        quarter_round(w[3], w[7], w[11], w[15]);
        quarter_round(w[0], w[5], w[10], w[15]);
        quarter_round(w[1], w[6], w[11], w[12]);
        quarter_round(w[2], w[7], w[8], w[13]);
        quarter_round(w[3], w[4], w[9], w[14]);
    }
    for (int i = 0; i < 16; ++i) store_le32(out + 4 * i, w[i] + st[i]);
}

inline void chacha20_xor(const Key& key, std::uint32_t counter, const Nonce& nonce,
                         const std::uint8_t* in, std::size_t len, std::uint8_t* out) {
    std::uint8_t block[64];
    while (len > 0) {
        chacha20_block(key, counter++, nonce, block);
        std::size_t n = len < 64 ? len : 64;
        for (std::size_t i = 0; i < n; ++i) out[i] = in[i] ^ block[i];
        in += n;
        out += n;
        len -= n;
    }
}

// Poly1305 with 26-bit limbs; h and r fit comfortably in 64-bit products.
class Poly1305 {
public:
    explicit Poly1305(const std::uint8_t key[32]) {
        r_[0] = load_le32(key) & 0x3ffffff;
        r_[1] = (load_le32(key + 3) >> 2) & 0x3ffff03;
        r_[2] = (load_le32(key + 6) >> 4) & 0x3ffc0ff;
        r_[3] = (load_le32(key + 9) >> 6) & 0x3f03fff;
        r_[4] = (load_le32(key + 12) >> 8) & 0x00fffff;
        std::memcpy(pad_, key + 16, 16);
        h_[0] = h_[1] = h_[2] = h_[3] = h_[4] = 0;
    }

    void update(const std::uint8_t* m, std::size_t len) {
        while (len > 0) {
            std::size_t n = len < 16 - fill_ ? len : 16 - fill_;
            std::memcpy(buf_ + fill_, m, n);
            fill_ += n;
            m += n;
            len -= n;
            if (fill_ == 16) {
                std::uint8_t blk[17];
                std::memcpy(blk, buf_, 16);
                blk[16] = 1;  // the 2^128 bit of every full block
                absorb(blk);
                fill_ = 0;
            }
        }
    }

    void finish(std::uint8_t tag[16]) {
        if (fill_ > 0) {
            std::uint8_t blk[17] = {0};
            std::memcpy(blk, buf_, fill_);
            blk[fill_] = 1;  // boundary marker inside the last partial block
            absorb(blk);
            fill_ = 0;
        }
        // full carry
        std::uint64_t h0 = h_[0], h1 = h_[1], h2 = h_[2], h3 = h_[3], h4 = h_[4];
        std::uint64_t c;
        c = h1 >> 26; h1 &= 0x3ffffff; h2 += c;
        c = h2 >> 26; h2 &= 0x3ffffff; h3 += c;
        c = h3 >> 26; h3 &= 0x3ffffff; h4 += c;
        c = h4 >> 26; h4 &= 0x3ffffff; h0 += c * 5;
        c = h0 >> 26; h0 &= 0x3ffffff; h1 += c;

        // compute h + (-p) and select
        std::uint64_t g0 = h0 + 5; c = g0 >> 26; g0 &= 0x3ffffff;
        std::uint64_t g1 = h1 + c; c = g1 >> 26; g1 &= 0x3ffffff;
        std::uint64_t g2 = h2 + c; c = g2 >> 26; g2 &= 0x3ffffff;
        std::uint64_t g3 = h3 + c; c = g3 >> 26; g3 &= 0x3ffffff;
        std::uint64_t g4 = h4 + c;
        if (g4 >> 26) {
            h0 = g0; h1 = g1; h2 = g2; h3 = g3; h4 = g4 & 0x3ffffff;
        }

        std::uint64_t f0 = (h0 | (h1 << 26)) & 0xffffffff;
        std::uint64_t f1 = ((h1 >> 6) | (h2 << 20)) & 0xffffffff;
        std::uint64_t f2 = ((h2 >> 12) | (h3 << 14)) & 0xffffffff;
        std::uint64_t f3 = ((h3 >> 18) | (h4 << 8)) & 0xffffffff;

        f0 += load_le32(pad_);
        f1 += load_le32(pad_ + 4) + (f0 >> 32);
        f2 += load_le32(pad_ + 8) + (f1 >> 32);
        f3 += load_le32(pad_ + 12) + (f2 >> 32);

        store_le32(tag, static_cast<std::uint32_t>(f0));
        store_le32(tag + 4, static_cast<std::uint32_t>(f1));
        store_le32(tag + 8, static_cast<std::uint32_t>(f2));
        store_le32(tag + 12, static_cast<std::uint32_t>(f3));
    }

private:
    void absorb(const std::uint8_t blk[17]) {
        std::uint64_t t0 = load_le32(blk);
        std::uint64_t t1 = load_le32(blk + 4);
        std::uint64_t t2 = load_le32(blk + 8);
        std::uint64_t t3 = load_le32(blk + 12);
        std::uint64_t hi = blk[16];

        h_[0] += t0 & 0x3ffffff;
        h_[1] += ((t0 >> 26) | (t1 << 6)) & 0x3ffffff;
        h_[2] += ((t1 >> 20) | (t2 << 12)) & 0x3ffffff;
        h_[3] += ((t2 >> 14) | (t3 << 18)) & 0x3ffffff;
        h_[4] += (t3 >> 8) | (hi << 24);

        std::uint64_t r0 = r_[0], r1 = r_[1], r2 = r_[2], r3 = r_[3], r4 = r_[4];
        std::uint64_t s1 = r1 * 5, s2 = r2 * 5, s3 = r3 * 5, s4 = r4 * 5;

        std::uint64_t d0 = h_[0] * r0 + h_[1] * s4 + h_[2] * s3 + h_[3] * s2 + h_[4] * s1;
        std::uint64_t d1 = h_[0] * r1 + h_[1] * r0 + h_[2] * s4 + h_[3] * s3 + h_[4] * s2;
        std::uint64_t d2 = h_[0] * r2 + h_[1] * r1 + h_[2] * r0 + h_[3] * s4 + h_[4] * s3;
        std::uint64_t d3 = h_[0] * r3 + h_[1] * r2 + h_[2] * r1 + h_[3] * r0 + h_[4] * s4;
        std::uint64_t d4 = h_[0] * r4 + h_[1] * r3 + h_[2] * r2 + h_[3] * r1 + h_[4] * r0;

        std::uint64_t c;
        c = d0 >> 26; d0 &= 0x3ffffff; d1 += c;
        c = d1 >> 26; d1 &= 0x3ffffff; d2 += c;
        c = d2 >> 26; d2 &= 0x3ffffff; d3 += c;
        c = d3 >> 26; d3 &= 0x3ffffff; d4 += c;
        c = d4 >> 26; d4 &= 0x3ffffff; d0 += c * 5;
        c = d0 >> 26; d0 &= 0x3ffffff; d1 += c;

        h_[0] = d0; h_[1] = d1; h_[2] = d2; h_[3] = d3; h_[4] = d4;
    }

    std::uint64_t r_[5];
    std::uint64_t h_[5];
    std::uint8_t pad_[16];
    std::uint8_t buf_[16] = {0};
    std::size_t fill_ = 0;
};

inline void poly1305_mac(const std::uint8_t key[32], ByteSpan msg, std::uint8_t tag[16]) {
    Poly1305 p(key);
    p.update(msg.data(), msg.size());
    p.finish(tag);
}

inline void aead_tag(const Key& key, const Nonce& nonce, ByteSpan aad, ByteSpan ct,
                     std::uint8_t tag[16]) {
    std::uint8_t poly_key[64];
    chacha20_block(key, 0, nonce, poly_key);
    Poly1305 p(poly_key);
    static constexpr std::uint8_t zeros[16] = {0};
    p.update(aad.data(), aad.size());
    if (aad.size() % 16) p.update(zeros, 16 - aad.size() % 16);
    p.update(ct.data(), ct.size());
    if (ct.size() % 16) p.update(zeros, 16 - ct.size() % 16);
    std::uint8_t lens[16];
    for (int i = 0; i < 8; ++i) {
        lens[i] = static_cast<std::uint8_t>(aad.size() >> (8 * i));
        lens[8 + i] = static_cast<std::uint8_t>(ct.size() >> (8 * i));
    }
    p.update(lens, 16);
    p.finish(tag);
}

}  // namespace detail

/// Encrypt and authenticate. Returns ciphertext || 16-byte tag.
inline Bytes aead_seal(const Key& key, const Nonce& nonce, ByteSpan aad, ByteSpan plaintext) {
    Bytes out(plaintext.size() + kTagLen);
    detail::chacha20_xor(key, 1, nonce, plaintext.data(), plaintext.size(), out.data());
    detail::aead_tag(key, nonce, aad, ByteSpan(out.data(), plaintext.size()),
                     out.data() + plaintext.size());
    return out;
}

/// Verify and decrypt ciphertext || tag. Empty optional on any mismatch.
inline std::optional<Bytes> aead_open(const Key& key, const Nonce& nonce, ByteSpan aad,
                                      ByteSpan sealed) {
    if (sealed.size() < kTagLen) return std::nullopt;
    ByteSpan ct = sealed.first(sealed.size() - kTagLen);
    std::uint8_t expect[kTagLen];
    detail::aead_tag(key, nonce, aad, ct, expect);
    std::uint8_t diff = 0;
    for (std::size_t i = 0; i < kTagLen; ++i) diff |= expect[i] ^ sealed[ct.size() + i];
    if (diff != 0) return std::nullopt;
    Bytes out(ct.size());
    detail::chacha20_xor(key, 1, nonce, ct.data(), ct.size(), out.data());
    return out;
}

}  // namespace fitsim::crypto
