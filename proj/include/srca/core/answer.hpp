#pragma once

/**
 * Answer identity.
 *
 * Every comparison of answers in the engine (clustering, voting, grading)
 * goes through normalize_answer(). The canonical form is:
 *
 *   - numeric literals (integers, decimals, thousands-grouped integers,
 *     a/b fractions, \frac{a}{b}) -> reduced rational "p" or "p/q"
 *   - anything else -> ASCII-lowercased, whitespace runs collapsed to " "
 *   - nothing left after stripping -> kEmptyAnswer ("")
 *
 * Before classification the last \boxed{...} / \fbox{...} is unwrapped,
 * enclosing $...$ and leading currency "$" are dropped, and trailing
 * punctuation [.,;:!?] is removed. The pass is applied to a fixed point, so
 * normalization is idempotent.
 */

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace srca {

/// Canonical form of an empty or blank answer. No non-empty input maps here.
inline const std::string kEmptyAnswer;

inline bool is_empty_answer(std::string_view normalized) { return normalized.empty(); }

namespace detail {

using i128 = __int128;

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline bool istarts_at(std::string_view s, std::size_t pos, std::string_view needle) {
  if (pos + needle.size() > s.size()) return false;
  for (std::size_t i = 0; i < needle.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[pos + i])) != needle[i]) return false;
  }
  return true;
}

/// Content of the last \boxed{...} or \fbox{...}; the input unchanged if none.
inline std::string unwrap_boxed(std::string_view s) {
  std::size_t open = std::string_view::npos;
  for (std::size_t i = s.size(); i-- > 0;) {
    if (istarts_at(s, i, "\\boxed{")) { open = i + 7; break; }
    if (istarts_at(s, i, "\\fbox{")) { open = i + 6; break; }
  }
  if (open == std::string_view::npos) return std::string(s);
  int depth = 1;
  std::size_t i = open;
  for (; i < s.size() && depth > 0; ++i) {
    if (s[i] == '{') ++depth;
    else if (s[i] == '}') --depth;
  }
  // Unbalanced: keep everything after the brace.
  if (depth != 0) return std::string(s.substr(open));
  return std::string(s.substr(open, i - 1 - open));
}

inline void erase_all(std::string& s, std::string_view what) {
  for (auto pos = s.find(what); pos != std::string::npos; pos = s.find(what, pos)) {
    s.erase(pos, what.size());
  }
}

struct Rational {
  i128 num = 0;
  i128 den = 1;
};

inline i128 gcd(i128 a, i128 b) {
  if (a < 0) a = -a;
  if (b < 0) b = -b;
  while (b != 0) {
    i128 t = a % b;
    a = b;
    b = t;
  }
  return a;
}

constexpr i128 kMaxMagnitude = static_cast<i128>(1) << 120;

/// Appends digits of `s` to `acc`; false on overflow or a non-digit.
inline bool accumulate_digits(std::string_view s, i128& acc) {
  for (char c : s) {
    if (c < '0' || c > '9') return false;
    acc = acc * 10 + (c - '0');
    if (acc > kMaxMagnitude) return false;
  }
  return true;
}

inline std::optional<i128> parse_signed_int(std::string_view s) {
  s = trim(s);
  bool neg = false;
  if (!s.empty() && (s.front() == '+' || s.front() == '-')) {
    neg = s.front() == '-';
    s.remove_prefix(1);
  }
  if (s.empty()) return std::nullopt;
  i128 v = 0;
  if (!accumulate_digits(s, v)) return std::nullopt;
  return neg ? -v : v;
}

inline std::optional<Rational> make_ratio(i128 num, i128 den) {
  if (den == 0) return std::nullopt;
  if (den < 0) { num = -num; den = -den; }
  i128 g = gcd(num, den);
  if (g > 1) { num /= g; den /= g; }
  return Rational{num, den};
}

/// Integer part: plain digits or 1-3 digits followed by ",ddd" groups.
inline bool parse_integer_part(std::string_view s, i128& out) {
  if (s.find(',') == std::string_view::npos) return accumulate_digits(s, out);
  auto first = s.find(',');
  if (first == 0 || first > 3) return false;
  std::string digits;
  std::size_t group_start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == ',') {
      std::size_t len = i - group_start;
      if (group_start != 0 && len != 3) return false;
      digits.append(s.substr(group_start, len));
      group_start = i + 1;
    }
  }
  return accumulate_digits(digits, out);
}

inline std::optional<Rational> parse_decimal(std::string_view s) {
  bool neg = false;
  if (!s.empty() && (s.front() == '+' || s.front() == '-')) {
    neg = s.front() == '-';
    s.remove_prefix(1);
  }
  auto dot = s.find('.');
  std::string_view whole = s.substr(0, dot);
  std::string_view frac = dot == std::string_view::npos ? std::string_view{} : s.substr(dot + 1);
  if (whole.empty() && frac.empty()) return std::nullopt;
  i128 num = 0;
  if (!whole.empty() && !parse_integer_part(whole, num)) return std::nullopt;
  if (frac.size() > 30) return std::nullopt;
  i128 den = 1;
  for (char c : frac) {
    if (c < '0' || c > '9') return std::nullopt;
    num = num * 10 + (c - '0');
    den *= 10;
    if (num > kMaxMagnitude) return std::nullopt;
  }
  return make_ratio(neg ? -num : num, den);
}

/// \frac{a}{b}, \dfrac{a}{b}, \tfrac{a}{b} with an optional leading sign.
inline std::optional<Rational> parse_latex_frac(std::string_view s) {
  bool neg = false;
  if (!s.empty() && (s.front() == '+' || s.front() == '-')) {
    neg = s.front() == '-';
    s.remove_prefix(1);
  }
  for (std::string_view head : {"\\frac{", "\\dfrac{", "\\tfrac{"}) {
    if (!s.starts_with(head)) continue;
    s.remove_prefix(head.size());
    auto close = s.find('}');
    if (close == std::string_view::npos) return std::nullopt;
    auto num = parse_signed_int(s.substr(0, close));
    s.remove_prefix(close + 1);
    if (!s.starts_with('{') || !s.ends_with('}')) return std::nullopt;
    auto den = parse_signed_int(s.substr(1, s.size() - 2));
    if (!num || !den) return std::nullopt;
    return make_ratio(neg ? -*num : *num, *den);
  }
  return std::nullopt;
}

inline std::optional<Rational> parse_slash(std::string_view s) {
  auto slash = s.find('/');
  if (slash == std::string_view::npos) return std::nullopt;
  auto num = parse_signed_int(s.substr(0, slash));
  auto den = parse_signed_int(s.substr(slash + 1));
  if (!num || !den) return std::nullopt;
  return make_ratio(*num, *den);
}

inline std::optional<Rational> parse_rational(std::string_view s) {
  if (s.find("frac{") != std::string_view::npos) return parse_latex_frac(s);
  if (s.find('/') != std::string_view::npos) return parse_slash(s);
  return parse_decimal(s);
}

inline std::string to_string(i128 v) {
  if (v == 0) return "0";
  bool neg = v < 0;
  if (neg) v = -v;
  std::string out;
  while (v > 0) {
    out.push_back(static_cast<char>('0' + static_cast<int>(v % 10)));
    v /= 10;
  }
  if (neg) out.push_back('-');
  std::reverse(out.begin(), out.end());
  return out;
}

inline std::string canonical(const Rational& r) {
  if (r.den == 1) return to_string(r.num);
  return to_string(r.num) + "/" + to_string(r.den);
}

inline std::string normalize_once(std::string_view raw) {
  std::string s = unwrap_boxed(trim(raw));
  erase_all(s, "\\!");
  erase_all(s, "\\,");
  std::string prev;
  do {
    prev = s;
    s = std::string(trim(s));
    if (s.size() >= 2 && s.front() == '$' && s.back() == '$') s = s.substr(1, s.size() - 2);
    while (!s.empty() && std::string_view(".,;:!?").find(s.back()) != std::string_view::npos) {
      s.pop_back();
    }
    if (s.starts_with("\\$")) {
      s.erase(0, 2);
    } else if (s.starts_with('$') && !s.ends_with('$')) {
      s.erase(0, 1);
    }
  } while (s != prev);
  if (s.empty()) return kEmptyAnswer;

  if (auto r = parse_rational(s)) return canonical(*r);

  std::string out;
  out.reserve(s.size());
  bool in_space = false;
  for (char c : s) {
    if (is_space(c)) {
      in_space = true;
      continue;
    }
    if (in_space && !out.empty()) out.push_back(' ');
    in_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

}  // namespace detail

/// Canonical answer form. Deterministic and idempotent.
inline std::string normalize_answer(std::string_view raw) {
  std::string cur(raw);
  for (int i = 0; i < 8; ++i) {
    std::string next = detail::normalize_once(cur);
    if (next == cur) break;
    cur = std::move(next);
  }
  return cur;
}

/// normalize_answer(a) == normalize_answer(b).
inline bool answers_equal(std::string_view a, std::string_view b) {
  return normalize_answer(a) == normalize_answer(b);
}

/**
 * Pulls the final answer out of a completed solution text: the last
 * \boxed{...} if any, else whatever follows the last "answer is" on its line,
 * else the last number-looking token. Returns "" when nothing is found.
 */
inline std::string extract_final_answer(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower.rfind("\\boxed{") != std::string::npos || lower.rfind("\\fbox{") != std::string::npos) {
    return detail::unwrap_boxed(text);
  }
  if (auto pos = lower.rfind("answer is"); pos != std::string::npos) {
    auto rest = text.substr(pos + 9);
    auto eol = rest.find('\n');
    return std::string(detail::trim(rest.substr(0, eol)));
  }
  std::size_t end = text.size();
  while (end > 0) {
    while (end > 0 && !std::isdigit(static_cast<unsigned char>(text[end - 1]))) --end;
    if (end == 0) break;
    std::size_t begin = end;
    while (begin > 0 && (std::isdigit(static_cast<unsigned char>(text[begin - 1])) ||
                         text[begin - 1] == '.' || text[begin - 1] == ',' ||
                         text[begin - 1] == '/')) {
      --begin;
    }
    if (begin > 0 && text[begin - 1] == '-') --begin;
    return std::string(text.substr(begin, end - begin));
  }
  return {};
}

}  // namespace srca
