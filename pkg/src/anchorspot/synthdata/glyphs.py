"""Vector-stroke glyphs for the 36-symbol alphabet.

Each glyph is a tuple of polylines in a unit box: x in [0, 1] left to
right, y in [0, 1] top to bottom. Rendering scales the box to the chosen
cap height and draws the strokes with a cap-proportional thickness, so the
generator has no font-file dependency.
"""

GLYPH_STROKES = {
    "a": (((0.0, 1.0), (0.5, 0.0), (1.0, 1.0)), ((0.2, 0.62), (0.8, 0.62))),
    "b": (((0.0, 0.0), (0.0, 1.0)),
          ((0.0, 0.0), (0.75, 0.08), (0.75, 0.42), (0.0, 0.5)),
          ((0.0, 0.5), (0.85, 0.58), (0.85, 0.92), (0.0, 1.0))),
    "c": (((1.0, 0.18), (0.65, 0.0), (0.3, 0.0), (0.0, 0.3), (0.0, 0.7),
           (0.3, 1.0), (0.65, 1.0), (1.0, 0.82)),),
    "d": (((0.0, 0.0), (0.0, 1.0)),
          ((0.0, 0.0), (0.6, 0.05), (1.0, 0.35), (1.0, 0.65), (0.6, 0.95), (0.0, 1.0))),
    "e": (((1.0, 0.0), (0.0, 0.0), (0.0, 1.0), (1.0, 1.0)), ((0.0, 0.5), (0.7, 0.5))),
    "f": (((1.0, 0.0), (0.0, 0.0), (0.0, 1.0)), ((0.0, 0.5), (0.7, 0.5))),
    "g": (((1.0, 0.15), (0.55, 0.0), (0.0, 0.3), (0.0, 0.7), (0.55, 1.0),
           (1.0, 0.8), (1.0, 0.55), (0.6, 0.55)),),
    "h": (((0.0, 0.0), (0.0, 1.0)), ((1.0, 0.0), (1.0, 1.0)), ((0.0, 0.5), (1.0, 0.5))),
    "i": (((0.2, 0.0), (0.8, 0.0)), ((0.5, 0.0), (0.5, 1.0)), ((0.2, 1.0), (0.8, 1.0))),
    "j": (((0.8, 0.0), (0.8, 0.75), (0.5, 1.0), (0.2, 1.0), (0.0, 0.8)),),
    "k": (((0.0, 0.0), (0.0, 1.0)), ((1.0, 0.0), (0.0, 0.5), (1.0, 1.0))),
    "l": (((0.0, 0.0), (0.0, 1.0), (1.0, 1.0)),),
    "m": (((0.0, 1.0), (0.0, 0.0), (0.5, 0.55), (1.0, 0.0), (1.0, 1.0)),),
    "n": (((0.0, 1.0), (0.0, 0.0), (1.0, 1.0), (1.0, 0.0)),),
    "o": (((0.5, 0.0), (0.0, 0.25), (0.0, 0.75), (0.5, 1.0),
           (1.0, 0.75), (1.0, 0.25), (0.5, 0.0)),),
    "p": (((0.0, 1.0), (0.0, 0.0), (0.85, 0.1), (0.85, 0.45), (0.0, 0.55)),),
    "q": (((0.5, 0.0), (0.0, 0.25), (0.0, 0.75), (0.5, 1.0),
           (1.0, 0.75), (1.0, 0.25), (0.5, 0.0)), ((0.6, 0.7), (1.0, 1.0))),
    "r": (((0.0, 1.0), (0.0, 0.0), (0.85, 0.1), (0.85, 0.42), (0.0, 0.5)),
          ((0.3, 0.5), (1.0, 1.0))),
    "s": (((1.0, 0.15), (0.5, 0.0), (0.0, 0.2), (0.5, 0.5),
           (1.0, 0.8), (0.5, 1.0), (0.0, 0.85)),),
    "t": (((0.0, 0.0), (1.0, 0.0)), ((0.5, 0.0), (0.5, 1.0))),
    "u": (((0.0, 0.0), (0.0, 0.75), (0.5, 1.0), (1.0, 0.75), (1.0, 0.0)),),
    "v": (((0.0, 0.0), (0.5, 1.0), (1.0, 0.0)),),
    "w": (((0.0, 0.0), (0.2, 1.0), (0.5, 0.45), (0.8, 1.0), (1.0, 0.0)),),
    "x": (((0.0, 0.0), (1.0, 1.0)), ((1.0, 0.0), (0.0, 1.0))),
    "y": (((0.0, 0.0), (0.5, 0.5), (1.0, 0.0)), ((0.5, 0.5), (0.5, 1.0))),
    "z": (((0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)),),
    "0": (((0.5, 0.0), (0.0, 0.25), (0.0, 0.75), (0.5, 1.0),
           (1.0, 0.75), (1.0, 0.25), (0.5, 0.0)), ((0.75, 0.2), (0.25, 0.8))),
    "1": (((0.25, 0.2), (0.6, 0.0), (0.6, 1.0)), ((0.3, 1.0), (0.9, 1.0))),
    "2": (((0.0, 0.2), (0.4, 0.0), (0.9, 0.1), (0.9, 0.35), (0.0, 1.0), (1.0, 1.0)),),
    "3": (((0.0, 0.1), (0.6, 0.0), (0.85, 0.25), (0.4, 0.5),
           (0.85, 0.75), (0.6, 1.0), (0.0, 0.9)),),
    "4": (((0.7, 1.0), (0.7, 0.0), (0.0, 0.7), (1.0, 0.7)),),
    "5": (((1.0, 0.0), (0.0, 0.0), (0.0, 0.45), (0.6, 0.4),
           (1.0, 0.7), (0.6, 1.0), (0.0, 0.9)),),
    "6": (((0.9, 0.1), (0.4, 0.0), (0.0, 0.4), (0.0, 0.8),
           (0.5, 1.0), (0.9, 0.75), (0.5, 0.5), (0.0, 0.6)),),
    "7": (((0.0, 0.0), (1.0, 0.0), (0.4, 1.0)),),
    "8": (((0.5, 0.45), (0.15, 0.22), (0.5, 0.0), (0.85, 0.22), (0.5, 0.45),
           (0.1, 0.72), (0.5, 1.0), (0.9, 0.72), (0.5, 0.45)),),
    "9": (((0.1, 0.9), (0.6, 1.0), (1.0, 0.6), (1.0, 0.2),
           (0.5, 0.0), (0.1, 0.25), (0.5, 0.5), (1.0, 0.4)),),
}

GLYPH_ASPECT = 0.7  # glyph box width as a fraction of cap height
