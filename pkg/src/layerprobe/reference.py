"""Published per-attribute prediction accuracies used by the comparison report.

Three methods per dataset over the 40 binary face attributes: the aligned
baseline, the two-stage cascaded CNN, and the best-representation approach
this toolkit reproduces. Values are percentages. Row order here is the
canonical row order of every emitted report.
"""

ATTRIBUTES = (
    "5 o Clock Shadow", "Arched Eyebrows", "Attractive", "Bags Under Eyes",
    "Bald", "Bangs", "Big Lips", "Big Nose", "Black Hair", "Blond Hair",
    "Blurry", "Brown Hair", "Bushy Eyebrows", "Chubby", "Double Chin",
    "Eyeglasses", "Goatee", "Gray Hair", "Heavy Makeup", "High Cheekbones",
    "Male", "Mouth S. Open", "Mustache", "Narrow Eyes", "No Beard",
    "Oval Face", "Pale Skin", "Pointy Nose", "Receding Hairline", "Rosy Cheeks",
    "Sideburns", "Smiling", "Straight Hair", "Wavy Hair", "Wearing Earrings",
    "Wearing Hat", "Wearing Lipstick", "Wearing Necklace", "Wearing Necktie",
    "Young",
)

TABLE1 = {
    "celeba": {
        "baseline": (
            86, 75, 79, 77, 92, 94, 63, 74, 77, 86,
            83, 74, 80, 86, 90, 96, 92, 93, 87, 85,
            95, 85, 87, 83, 91, 65, 89, 67, 84, 85,
            94, 92, 70, 79, 77, 93, 91, 70, 90, 81,
        ),
        "lnet_anet": (
            91, 79, 81, 79, 98, 95, 68, 78, 88, 95,
            84, 80, 90, 91, 92, 99, 95, 97, 90, 87,
            98, 92, 95, 81, 95, 66, 91, 72, 89, 90,
            96, 92, 73, 80, 82, 99, 93, 71, 93, 87,
        ),
        "ours": (
            89, 83, 82, 79, 96, 94, 70, 79, 87, 93,
            87, 79, 87, 88, 89, 99, 94, 95, 91, 87,
            99, 92, 93, 78, 94, 67, 85, 73, 87, 88,
            95, 92, 73, 79, 82, 96, 93, 73, 91, 86,
        ),
    },
    "lfwa": {
        "baseline": (
            78, 66, 75, 72, 86, 84, 70, 73, 82, 90,
            75, 71, 69, 68, 70, 88, 68, 82, 89, 79,
            91, 76, 79, 74, 69, 66, 68, 72, 70, 71,
            72, 82, 72, 65, 87, 82, 86, 81, 72, 79,
        ),
        "lnet_anet": (
            84, 82, 83, 83, 88, 88, 75, 81, 90, 97,
            74, 77, 82, 73, 78, 95, 78, 84, 95, 88,
            94, 82, 92, 81, 79, 74, 84, 80, 85, 78,
            77, 91, 76, 76, 94, 88, 95, 88, 79, 86,
        ),
        "ours": (
            77, 83, 79, 83, 91, 91, 78, 83, 90, 97,
            88, 76, 83, 75, 80, 91, 83, 87, 95, 88,
            94, 81, 94, 81, 80, 75, 73, 83, 86, 82,
            82, 90, 77, 77, 94, 90, 95, 90, 81, 86,
        ),
    },
}

# dataset files name attributes with underscores and a few abbreviations
_ALIASES = {
    "Mouth Slightly Open": "Mouth S. Open",
    "Mouth S Open": "Mouth S. Open",
}


def canonical_attribute(name):
    """Map dataset-file spellings onto the canonical display names."""
    cleaned = name.replace("_", " ").strip()
    return _ALIASES.get(cleaned, cleaned)


def reference_mean(dataset, method):
    row = TABLE1[dataset][method]
    return sum(row) / len(row)
