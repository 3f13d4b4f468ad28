#!/usr/bin/env python3
"""Regenerate core/include/lime/unicode_tables.hpp from the Python unicodedata
snapshot. The header is committed; rerun only when bumping the Unicode version."""

import sys
import unicodedata

MAX_CP = 0x110000


def ranges(predicate):
    out = []
    start = None
    for cp in range(MAX_CP):
        ch = chr(cp)
        if predicate(ch):
            if start is None:
                start = cp
        else:
            if start is not None:
                out.append((start, cp - 1))
                start = None
    if start is not None:
        out.append((start, MAX_CP - 1))
    return out


def is_space(ch):
    return ch.isspace()


def is_punct(ch):
    return unicodedata.category(ch).startswith("P")


def is_symbol(ch):
    return unicodedata.category(ch).startswith("S")


def is_letter(ch):
    return unicodedata.category(ch).startswith("L")


def is_digit(ch):
    return unicodedata.category(ch) == "Nd"


def emit(name, rs, out):
    out.write(f"inline constexpr CodepointRange {name}[] = {{\n")
    for i in range(0, len(rs), 4):
        chunk = ", ".join(f"{{0x{a:06X}, 0x{b:06X}}}" for a, b in rs[i : i + 4])
        out.write(f"    {chunk},\n")
    out.write("};\n\n")


def main():
    path = sys.argv[1] if len(sys.argv) > 1 else "core/include/lime/unicode_tables.hpp"
    tables = [
        ("kWhitespaceRanges", ranges(is_space)),
        ("kPunctuationRanges", ranges(is_punct)),
        ("kSymbolRanges", ranges(is_symbol)),
        ("kLetterRanges", ranges(is_letter)),
        ("kDecimalDigitRanges", ranges(is_digit)),
    ]
    with open(path, "w", encoding="utf-8") as out:
        out.write("// Generated by tools/gen_unicode_tables.py (unicodedata "
                  f"{unicodedata.unidata_version}). Do not edit by hand.\n")
        out.write("#pragma once\n\n#include <cstdint>\n\n")
        out.write("namespace lime::uni {\n\n")
        out.write("struct CodepointRange {\n    uint32_t first;\n    uint32_t last;\n};\n\n")
        for name, rs in tables:
            emit(name, rs, out)
        out.write("}  // namespace lime::uni\n")
    total = sum(len(r) for _, r in tables)
    print(f"wrote {path}: {total} ranges")


if __name__ == "__main__":
    main()
