"""Hand-built parser cases shared by the unit and acceptance suites.

Each case: (case_id, raw model output, expected (question, type, score)
triples in order, expected rejection reasons in order).
"""

from shopq.parsing import QUESTION_TYPES, QuestionSuggestion


def random_suggestion(rng) -> QuestionSuggestion:
    """A structurally valid random suggestion for round-trip properties."""
    words = [
        "".join(rng.choice("abcdefghijklmnopqrstuvwxyz") for _ in range(rng.randint(2, 9)))
        for _ in range(rng.randint(1, 14))
    ]
    question = (" ".join(words)).capitalize() + "?"
    return QuestionSuggestion.build(
        question=question,
        question_type=rng.choice(QUESTION_TYPES),
        interest_score=rng.randint(1, 10),
        context_id=f"ctx{rng.randint(0, 999)}",
    )

CAT_MAT = "Are cats afraid of the beep emitted from the mat? | specific product aspect | 8"
DOORBELL_Q1 = "What are key features of this doorbell? | broad features | 7"
DOORBELL_Q2 = "Can the camera enable mobile phone monitoring? | specific product aspect | 8"

PARSER_CASES = [
    (
        "well_formed_cat_mat",
        CAT_MAT,
        [("Are cats afraid of the beep emitted from the mat?", "specific_aspect", 8)],
        [],
    ),
    (
        "well_formed_broad",
        DOORBELL_Q1,
        [("What are key features of this doorbell?", "broad_features", 7)],
        [],
    ),
    (
        "score_upper_bound",
        "Is it waterproof? | compatibility | 10",
        [("Is it waterproof?", "compatibility", 10)],
        [],
    ),
    (
        "score_lower_bound",
        "Does it come with a warranty? | buying guide | 1",
        [("Does it come with a warranty?", "buying_guide", 1)],
        [],
    ),
    (
        "comparison_type",
        "How does it compare to the old model? | comparison | 5",
        [("How does it compare to the old model?", "comparison", 5)],
        [],
    ),
    (
        "unknown_type_maps_to_other",
        "Will it fit a king mattress? | totally new category | 4",
        [("Will it fit a king mattress?", "other", 4)],
        [],
    ),
    (
        "three_lines",
        "\n".join(
            [
                DOORBELL_Q1,
                DOORBELL_Q2,
                "Can the camera take pictures, record videos, and store them on a "
                "mobile device? | specific product aspect | 6",
            ]
        ),
        [
            ("What are key features of this doorbell?", "broad_features", 7),
            ("Can the camera enable mobile phone monitoring?", "specific_aspect", 8),
            (
                "Can the camera take pictures, record videos, and store them on a mobile device?",
                "specific_aspect",
                6,
            ),
        ],
        [],
    ),
    ("header_compact", "question|type|score", [], ["header"]),
    ("header_spaced", "Question | Type | Score", [], ["header"]),
    (
        "header_then_valid",
        "QUESTION|TYPE|SCORE\n" + CAT_MAT,
        [("Are cats afraid of the beep emitted from the mat?", "specific_aspect", 8)],
        ["header"],
    ),
    (
        "preamble_then_valid",
        "Sure! Here are the questions:\n" + CAT_MAT,
        [("Are cats afraid of the beep emitted from the mat?", "specific_aspect", 8)],
        ["preamble"],
    ),
    ("prose_only", "Here you go", [], ["preamble"]),
    (
        "preamble_and_trailing_prose",
        "Certainly!\nThe list follows:\n" + DOORBELL_Q1 + "\nHope that helps!",
        [("What are key features of this doorbell?", "broad_features", 7)],
        ["preamble", "preamble", "wrong_field_count"],
    ),
    ("score_too_high", "What is it? | comparison | 15", [], ["score_out_of_range"]),
    ("score_too_low", "What is it? | comparison | 0", [], ["score_out_of_range"]),
    ("score_not_numeric", "What is it? | comparison | high", [], ["bad_score"]),
    ("score_fractional", "What is it? | comparison | 7.5", [], ["bad_score"]),
    ("two_fields_before_valid", "What is it? | comparison", [], ["preamble"]),
    (
        "two_fields_after_valid",
        CAT_MAT + "\nWhat is it? | comparison",
        [("Are cats afraid of the beep emitted from the mat?", "specific_aspect", 8)],
        ["wrong_field_count"],
    ),
    ("four_fields", "a | b | c | d", [], ["preamble"]),
    ("statement_not_question", "It is waterproof. | broad features | 5", [], ["not_a_question"]),
    ("empty_question_field", " | broad features | 5", [], ["empty_question"]),
    ("missing_question_mark", "Is it loud | broad features | 5", [], ["not_a_question"]),
    ("empty_input", "", [], []),
    ("blank_lines_only", "\n\n   \n", [], []),
    (
        "valid_between_blanks",
        "\n\n" + DOORBELL_Q2 + "\n\n",
        [("Can the camera enable mobile phone monitoring?", "specific_aspect", 8)],
        [],
    ),
    (
        "whitespace_and_casing",
        "  Are cats afraid of the beep emitted from the mat?  |  SPECIFIC PRODUCT ASPECT  |  8  ",
        [("Are cats afraid of the beep emitted from the mat?", "specific_aspect", 8)],
        [],
    ),
    (
        "long_type_synonym",
        "Does it sync? | Broad Features Of The Product | 9",
        [("Does it sync?", "broad_features", 9)],
        [],
    ),
]
