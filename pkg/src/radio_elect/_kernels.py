"""Compiled inner loop for the opening slots of a round.

Slot i of a round wakes a station with probability 2**-e_i, which is the
chance that e_i fair bits are all ones. The first few slots (the ones where a
large fraction of stations wake) are therefore sampled together from one
16-bit random word per station: a lookup table turns the word into an 8-bit
pattern code, bit s meaning "woke in slot s" and, for Alg2, bit s + 4 meaning
"woke in slot s and chose to send".
"""

from functools import lru_cache

import numpy as np
from numba import njit

WORD_BITS = 16


@njit(cache=True)
def tally_patterns(words, table, wakes_in, awake, codes, hist):
    for i in range(words.shape[0]):
        code = table[words[i]]
        codes[i] = code
        hist[code] += 1
        awake[i] += wakes_in[code]


@njit(cache=True)
def tally_weak_patterns(words, table, wakes_in, awake, codes, hist, broadcaster):
    """As tally_patterns, also flagging stations that sent in some opening slot."""
    for i in range(words.shape[0]):
        code = table[words[i]]
        codes[i] = code
        hist[code] += 1
        awake[i] += wakes_in[code]
        broadcaster[i] = broadcaster[i] | (code >= 16)


@njit(cache=True)
def close_weak_round(broadcaster, witness_for, awake, listening):
    """Awake accounting for both closing slots of an Alg2 round.

    Witnesses and broadcasters are up in the first closing slot, everyone in
    the second. ``listening`` receives the first slot's audience: stations
    that broadcast this round and are not witnesses. ``broadcaster`` is
    cleared for the next round.
    """
    for i in range(awake.shape[0]):
        witness = witness_for[i] != 0
        listening[i] = broadcaster[i] and not witness
        awake[i] += 2 if (broadcaster[i] or witness) else 1
        broadcaster[i] = False


def dense_exponents(k_start: int, length: int, coin: bool) -> tuple:
    """Wake exponents of the leading slots that fit in one 16-bit word."""
    limit = 4 if coin else 8
    exps, used = [], 0
    for i in range(min(length, limit)):
        e = k_start + i
        need = e + (1 if coin else 0)
        if used + need > WORD_BITS:
            break
        exps.append(e)
        used += need
    return tuple(exps)


@lru_cache(maxsize=None)
def pattern_table(exponents: tuple, coin: bool):
    """(table, wakes_in): word -> pattern code, and code -> number of slots woken."""
    words = np.arange(1 << WORD_BITS, dtype=np.int64)
    table = np.zeros(1 << WORD_BITS, dtype=np.int64)
    offset = 0
    for s, e in enumerate(exponents):
        mask = (1 << e) - 1
        woke = ((words >> offset) & mask) == mask
        offset += e
        table |= woke.astype(np.int64) << s
        if coin:
            sends = woke & (((words >> offset) & 1) == 1)
            offset += 1
            table |= sends.astype(np.int64) << (s + 4)
    codes = np.arange(256)
    wake_bits = (1 << len(exponents)) - 1
    wakes_in = np.array([bin(c & wake_bits).count("1") for c in codes], dtype=np.int64)
    return table.astype(np.uint8), wakes_in
