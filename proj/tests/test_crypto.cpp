#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fitsim/crypto.hpp"
#include "fitsim/rng.hpp"

using namespace fitsim;
using namespace fitsim::crypto;

namespace {

Key key_from_hex(const std::string& h) {
    Bytes b = from_hex(h);
    REQUIRE(b.size() == kKeyLen);
    Key k{};
    std::copy(b.begin(), b.end(), k.begin());
    return k;
}

Nonce nonce_from_hex(const std::string& h) {
    Bytes b = from_hex(h);
    REQUIRE(b.size() == kNonceLen);
    Nonce n{};
    std::copy(b.begin(), b.end(), n.begin());
    return n;
}

const char* kSunscreen =
    "Ladies and Gentlemen of the class of '99: If I could offer you only one tip "
    "for the future, sunscreen would be it.";

}  // namespace

TEST_CASE("chacha20 block function reference vector") {
    Key k{};
    for (int i = 0; i < 32; ++i) k[i] = static_cast<std::uint8_t>(i);
    Nonce n = nonce_from_hex("000000090000004a00000000");
    std::uint8_t block[64];
    detail::chacha20_block(k, 1, n, block);
    CHECK(to_hex(ByteSpan(block, 64)) ==
          "10f1e7e4d13b5915500fdd1fa32071c4c7d1f4c733c068030422aa9ac3d46c4e"
          "d2826446079faa0914c2d705d98b02a2b5129cd1de164eb9cbd083e8a2503c4e");
}

TEST_CASE("chacha20 stream cipher reference vector") {
    Key k{};
    for (int i = 0; i < 32; ++i) k[i] = static_cast<std::uint8_t>(i);
    Nonce n = nonce_from_hex("000000000000004a00000000");
    Bytes pt = to_bytes(kSunscreen);
    Bytes ct(pt.size());
    detail::chacha20_xor(k, 1, n, pt.data(), pt.size(), ct.data());
    CHECK(to_hex(ct) ==
          "6e2e359a2568f98041ba0728dd0d6981e97e7aec1d4360c20a27afccfd9fae0b"
          "f91b65c5524733ab8f593dabcd62b3571639d624e65152ab8f530c359f0861d8"
          "07ca0dbf500d6a6156a38e088a22b65e52bc514d16ccf806818ce91ab7793736"
          "5af90bbf74a35be6b40b8eedf2785e42874d");
}

TEST_CASE("poly1305 reference vector") {
    Bytes key = from_hex("85d6be7857556d337f4452fe42d506a80103808afb0db2fd4abff6af4149f51b");
    Bytes msg = to_bytes("Cryptographic Forum Research Group");
    std::uint8_t tag[16];
    detail::poly1305_mac(key.data(), msg, tag);
    CHECK(to_hex(ByteSpan(tag, 16)) == "a8061dc1305136c6c22b8baf0c0127a9");
}

TEST_CASE("aead reference vector") {
    Key k = key_from_hex("808182838485868788898a8b8c8d8e8f909192939495969798999a9b9c9d9e9f");
    Nonce n = nonce_from_hex("070000004041424344454647");
    Bytes aad = from_hex("50515253c0c1c2c3c4c5c6c7");
    Bytes sealed = aead_seal(k, n, aad, to_bytes(kSunscreen));
    CHECK(to_hex(sealed) ==
          "d31a8d34648e60db7b86afbc53ef7ec2a4aded51296e08fea9e2b5a736ee62d6"
          "3dbea45e8ca9671282fafb69da92728b1a71de0a9e060b2905d6a5b67ecd3b36"
          "92ddbd7f2d778b8c9803aee328091b58fab324e4fad675945585808b4831d7bc"
          "3ff4def08e4b7a9de576d26586cec64b6116"
          "1ae10b594f09e26a7e902ecbd0600691");
    auto opened = aead_open(k, n, aad, sealed);
    REQUIRE(opened.has_value());
    CHECK(*opened == to_bytes(kSunscreen));
}

TEST_CASE("aead independent-oracle vectors") {
    struct V {
        const char *key, *nonce, *aad, *pt, *ct;
    };
    // Frozen from an external ChaCha20-Poly1305 implementation.
    const V vectors[] = {
        {"a819408ce5010ca2e09ef59ac3d89f5ff8595d02b524e61bf8afa894a95d594f",
         "648f8e193a06c30767e71fb3", "68647230", "00010203040506070809",
         "620a7c846a5413cadc0e0632208ef7b4b692dd61bca4862c4c56"},
        {"8174099687a26621f4e2cdd7cc03b3dacedb3fb962255b1aafd033cabe831530",
         "0a78009591722cc84825ca95", "68647231", "0708090a0b0c0d0e0f101112131415161718191a",
         "c9c33874554757f9ca943b3705722fea3c8a2f8fdcfa91aa417721f41fb92329d15a84b4"},
        {"b10253764c8b233fb37542e23401c7b450e5a6f9751f3b5a014f6f67e8bc999d",
         "626e1e3b6935c66a2c8ab9c8", "68647232",
         "0e0f101112131415161718191a1b1c1d1e1f202122232425262728292a2b",
         "7af3b37e3ae8b8fbf3e11b09d89f737d185a28b9cef43bb927eab45b8566db05cdd7bb3181a3e1b976010146d738"},
    };
    for (const auto& v : vectors) {
        Key k = key_from_hex(v.key);
        Nonce n = nonce_from_hex(v.nonce);
        CHECK(to_hex(aead_seal(k, n, from_hex(v.aad), from_hex(v.pt))) == v.ct);
        auto opened = aead_open(k, n, from_hex(v.aad), from_hex(v.ct));
        REQUIRE(opened.has_value());
        CHECK(*opened == from_hex(v.pt));
    }
}

TEST_CASE("every single-bit flip of ciphertext or tag fails authentication") {
    Key k = key_from_hex("000102030405060708090a0b0c0d0e0f101112131415161718191a1b1c1d1e1f");
    Nonce n = nonce_from_hex("000102030405060708090a0b");
    Bytes aad = to_bytes("hdr");
    Bytes sealed = aead_seal(k, n, aad, to_bytes("twelve bytes"));
    for (std::size_t byte = 0; byte < sealed.size(); ++byte) {
        for (int bit = 0; bit < 8; ++bit) {
            Bytes mut = sealed;
            mut[byte] ^= static_cast<std::uint8_t>(1u << bit);
            REQUIRE_FALSE(aead_open(k, n, aad, mut).has_value());
        }
    }
}

TEST_CASE("wrong key, wrong aad, truncation all fail") {
    Key k = key_from_hex("000102030405060708090a0b0c0d0e0f101112131415161718191a1b1c1d1e1f");
    Key k2 = k;
    k2[0] ^= 1;
    Nonce n{};
    Bytes sealed = aead_seal(k, n, to_bytes("a"), to_bytes("payload"));
    CHECK_FALSE(aead_open(k2, n, to_bytes("a"), sealed).has_value());
    CHECK_FALSE(aead_open(k, n, to_bytes("b"), sealed).has_value());
    CHECK_FALSE(aead_open(k, n, to_bytes("a"), ByteSpan(sealed.data(), 8)).has_value());
    CHECK(aead_open(k, n, to_bytes("a"), sealed).has_value());
}

TEST_CASE("seal/open round trip across sizes") {
    Rng rng(1234);
    Key k{};
    for (auto& b : k) b = static_cast<std::uint8_t>(rng.uniform(0, 255));
    for (std::size_t len : {0, 1, 15, 16, 17, 63, 64, 65, 200, 1024}) {
        Nonce n{};
        Bytes nb = rng.bytes(kNonceLen);
        std::copy(nb.begin(), nb.end(), n.begin());
        Bytes pt = rng.bytes(len);
        Bytes aad = rng.bytes(rng.uniform(0, 24));
        auto opened = aead_open(k, n, aad, aead_seal(k, n, aad, pt));
        REQUIRE(opened.has_value());
        REQUIRE(*opened == pt);
    }
}
