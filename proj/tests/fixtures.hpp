// Shared question-text fixtures used by the qparse unit tests and the
// acceptance suite.
#pragma once

namespace fixtures {

inline constexpr const char* kBalancedNumbersMcq =
    "We say that a three-digit number is balanced if the middle digit is the arithmetic mean "
    "of the other two digits. How many balanced numbers are divisible by 18?\n"
    "(A) 2\n(B) 3\n(C) 6\n(D) 9\n(E) 18";

inline constexpr const char* kWoundHealingMcq =
    "During the proliferative phase of wound healing, ... build new tissue by secreting ... "
    "to take the shape of the original tissue.\n"
    "A. Fibroblasts, collagen\n"
    "B. Platelets, collagen\n"
    "C. Mast cells, histamine\n"
    "D. Neutrophils, keratin";

inline constexpr const char* kNetworkEssay =
    "Discuss the benefits and constraints of different network types and standards.";

inline constexpr const char* kBirthrateInlineMcq =
    "If a country has a birthrate of 13 and a death rate of 9, what is the % increase?\n"
    "Options: .2 .4 2 4";

inline constexpr const char* kSlopesInlineMcq =
    "Systems of equations with different slopes and different y-intercepts have more than one "
    "solution. (5 points)   Always   Sometimes   Never";

inline constexpr const char* kSqlCourseQuestion =
    "Return the id, host name, and host id of the accommodation that has the highest "
    "\"host_total_listings_count\". Return only the first result.";

}  // namespace fixtures
