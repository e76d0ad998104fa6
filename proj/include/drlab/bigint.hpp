#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dr {

// Unsigned arbitrary-precision integer, base 2^32 limbs, little-endian.
// Only the operations the exact-rational pmf mode needs: add, subtract,
// multiply, compare, small powers, decimal printing. No division by design;
// rational pmfs keep a shared denominator, so equality checks cross-multiply.
class BigUint {
public:
    BigUint() = default;
    explicit BigUint(std::uint64_t v);

    bool is_zero() const { return limbs_.empty(); }
    std::size_t bit_length() const;

    int compare(const BigUint& o) const;
    bool operator==(const BigUint& o) const { return compare(o) == 0; }
    bool operator!=(const BigUint& o) const { return compare(o) != 0; }
    bool operator<(const BigUint& o) const { return compare(o) < 0; }
    bool operator<=(const BigUint& o) const { return compare(o) <= 0; }

    BigUint& operator+=(const BigUint& o);
    friend BigUint operator+(BigUint a, const BigUint& b) { a += b; return a; }
    // Requires *this >= o.
    BigUint& operator-=(const BigUint& o);
    friend BigUint operator*(const BigUint& a, const BigUint& b);

    BigUint pow(unsigned e) const;

    double to_double() const;
    std::string to_string() const;

private:
    void trim();
    std::vector<std::uint32_t> limbs_;  // no trailing zero limbs
};

}  // namespace dr
