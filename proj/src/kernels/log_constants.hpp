#pragma once

// Shared constants for the portable natural logarithm.
//
// log(u) = e*ln2 + 2*atanh(s), s = (m - 1)/(m + 1), with u = m * 2^e and
// m in [sqrt(1/2), sqrt(2)). Then |s| < 0.1716 and the odd series
// 2*(s + s^3/3 + ... + s^19/19) is accurate to well under one ulp.

namespace bdwalk::kernels::detail {

inline constexpr int kLogTerms = 10;

// c[k] = 1/(2k+1), evaluated by Horner in z = s^2 from the highest term.
inline constexpr double kLogCoeff[kLogTerms] = {
    1.0,        1.0 / 3.0,  1.0 / 5.0,  1.0 / 7.0,  1.0 / 9.0,  1.0 / 11.0,
    1.0 / 13.0, 1.0 / 15.0, 1.0 / 17.0, 1.0 / 19.0,
};

inline constexpr double kLn2Hi = 6.93147180369123816490e-01;
inline constexpr double kLn2Lo = 1.90821492927058770002e-10;
inline constexpr double kSqrt2 = 1.41421356237309504880;

}  // namespace bdwalk::kernels::detail
