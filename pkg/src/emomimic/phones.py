"""Desk-scale phoneme inventory shared by the corpus generator and synthesizer.

Transcripts throughout the project are space-separated strings of these
tokens. Each voiced phone carries a fixed resonance frequency so that
phone identity is recoverable from the spectral envelope.
"""

SILENCE = "sil"

# 10 speakable phones + silence.
DEFAULT_INVENTORY = ("sil", "a", "e", "i", "o", "u", "k", "s", "t", "n", "m")

# Resonance center per phone, Hz. Values are arbitrary but fixed: they only
# need to be distinct and well inside the analysis band at 16 kHz.
FORMANT_HZ = {
    "a": 850.0,
    "e": 600.0,
    "i": 350.0,
    "o": 500.0,
    "u": 400.0,
    "k": 1800.0,
    "s": 2800.0,
    "t": 2200.0,
    "n": 1200.0,
    "m": 950.0,
}

SPEAKABLE_PHONES = tuple(p for p in DEFAULT_INVENTORY if p != SILENCE)
