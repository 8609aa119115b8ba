import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uniqa.errors import TableParseError, ValidationError
from uniqa.unirep import (
    Clue,
    ConversationTurn,
    ImageMeta,
    ObjectAttr,
    TableDoc,
    TextDoc,
    TextualizationConfig,
    build_contextual_question,
    linearize_table,
    make_clue,
    reconstruct_table,
    textualize_image,
)

CFG = TextualizationConfig()


def roundtrip(table: TableDoc) -> TableDoc:
    return reconstruct_table(linearize_table(table))


def assert_same_table(a: TableDoc, b: TableDoc) -> None:
    assert (a.header, a.rows, a.title) == (b.header, b.rows, b.title)


# --- linearize_table -------------------------------------------------------

def test_linearize_single_row():
    t = TableDoc(id="t1", header=["race", "track"],
                 rows=[["Santa Derby", "Santa Park"]])
    assert linearize_table(t) == "Row one's race is Santa Derby, the track is Santa Park."


def test_linearize_title_and_two_rows():
    t = TableDoc(id="t2", header=["race"], rows=[["A"], ["B"]], title="Derbies")
    assert linearize_table(t) == "Table: Derbies. Row one's race is A. Row two's race is B."


def test_linearize_empty_table_emits_column_sentence():
    # Zero-row tables keep their header so reconstruction stays exact.
    t = TableDoc(id="t3", header=["x"], rows=[])
    assert linearize_table(t) == "Columns: x."
    assert_same_table(roundtrip(t), t)


def test_linearize_quotes_delimiter_cells():
    t = TableDoc(id="t4", header=["a", "b"], rows=[["v, w", "q"]])
    text = linearize_table(t)
    assert '"v, w"' in text
    assert_same_table(roundtrip(t), t)


def test_linearize_numeral_ordinals_beyond_ten():
    t = TableDoc(id="t5", header=["n"], rows=[[str(i)] for i in range(12)])
    text = linearize_table(t)
    assert "Row ten's" in text and "Row 11's" in text and "Row 12's" in text
    assert_same_table(roundtrip(t), t)


def test_linearize_rejects_ragged_rows():
    t = TableDoc(id="t6", header=["a", "b"], rows=[["only one"]])
    with pytest.raises(ValidationError):
        linearize_table(t)


def test_linearize_rejects_empty_header():
    with pytest.raises(ValidationError):
        linearize_table(TableDoc(id="t7", header=[], rows=[]))


# --- reconstruct_table -----------------------------------------------------

def test_reconstruct_empty_input_is_parse_error():
    with pytest.raises(TableParseError, match="empty input"):
        reconstruct_table("")


def test_reconstruct_unterminated_quote_reports_position():
    with pytest.raises(TableParseError, match="unterminated quote") as exc:
        reconstruct_table('Row one\'s a is "broken.')
    assert exc.value.position == 15


def test_reconstruct_rejects_inconsistent_headers():
    text = "Row one's a is 1. Row two's b is 2."
    with pytest.raises(TableParseError, match="inconsistent headers"):
        reconstruct_table(text)


def test_reconstruct_rejects_out_of_sequence_ordinal():
    with pytest.raises(TableParseError, match="out of sequence"):
        reconstruct_table("Row two's a is 1.")


def test_reconstruct_title_only_is_truncation_error():
    with pytest.raises(TableParseError, match="missing table body"):
        reconstruct_table("Table: Orphan.")


NASTY_CELLS = [
    "", " ", "plain", "v, w", "end.", "it's", "a:b", 'say "hi"',
    '"leading quote', "Row one's race is x", "the b is c", "x is y",
    "a is", "is", ", the ", ". Row two's", "Table: fake", "Columns: fake",
    "multi\nline", "  padded  ", "tab\tcell", '""', "unicode café",
]


def test_roundtrip_nasty_cell_matrix():
    for a in NASTY_CELLS:
        for b in NASTY_CELLS:
            t = TableDoc(id="t", header=[a if a else "h", b],
                         rows=[[b, a], [a, b]], title=a if a else None)
            assert_same_table(roundtrip(t), t)


@st.composite
def tables(draw):
    cell = st.lists(
        st.sampled_from(list("ab .,':\"R\n\t") + ["Row", "is", "the"]),
        max_size=6,
    ).map("".join)
    n_cols = draw(st.integers(1, 8))
    n_rows = draw(st.integers(0, 20))
    header = draw(st.lists(cell, min_size=n_cols, max_size=n_cols))
    rows = draw(st.lists(
        st.lists(cell, min_size=n_cols, max_size=n_cols),
        min_size=n_rows, max_size=n_rows,
    ))
    title = draw(st.one_of(st.none(), cell))
    return TableDoc(id="f", header=header, rows=rows, title=title)


@settings(max_examples=300, deadline=None)
@given(tables())
def test_roundtrip_property(table):
    assert_same_table(roundtrip(table), table)


def test_roundtrip_randomized_delimiter_cells():
    rng = random.Random(7)
    pieces = ["x", "y", ",", ".", "'", ":", '"', " ", "Row", "is", "the", "Table:"]
    def cell():
        return "".join(rng.choice(pieces) for _ in range(rng.randint(0, 5)))
    for _ in range(200):
        n_cols = rng.randint(1, 8)
        t = TableDoc(
            id="r",
            header=[cell() for _ in range(n_cols)],
            rows=[[cell() for _ in range(n_cols)] for _ in range(rng.randint(0, 20))],
            title=cell() if rng.random() < 0.5 else None,
        )
        assert_same_table(roundtrip(t), t)


# --- textualize_image ------------------------------------------------------

def test_textualize_local_attributes_ordering():
    meta = ImageMeta(id="i1", caption="horses racing at Churchill Downs",
                     objects=[ObjectAttr(name="horse", attributes=["racing", "brown"])])
    text = textualize_image(meta, CFG)
    assert "racing brown horse" in text
    assert text == "horses racing at Churchill Downs. Objects: racing brown horse."


def test_textualize_without_objects_has_no_local_segment():
    meta = ImageMeta(id="i2", caption="a quiet field")
    assert textualize_image(meta, CFG) == "a quiet field."


def test_textualize_title_caption_objects_template():
    meta = ImageMeta(id="i3", caption="c", title="Kentucky Derby",
                     objects=[ObjectAttr(name="o", attributes=["a"])])
    assert textualize_image(meta, CFG) == "Kentucky Derby. c. Objects: a o."


def test_textualize_multiple_objects_joined_with_semicolon():
    meta = ImageMeta(id="i4", caption="c",
                     objects=[ObjectAttr("horse", ["brown"]), ObjectAttr("fence", [])])
    assert textualize_image(meta, CFG) == "c. Objects: brown horse; fence."


def test_textualize_global_disabled():
    meta = ImageMeta(id="i5", caption="c", objects=[ObjectAttr("o", ["a"])])
    cfg = TextualizationConfig(use_global=False)
    assert textualize_image(meta, cfg) == "Objects: a o."


def test_textualize_global_only_is_prefix_of_full():
    meta = ImageMeta(id="i6", caption="cap", title="T",
                     objects=[ObjectAttr("o", ["a", "b"])])
    full = textualize_image(meta, CFG)
    no_local = textualize_image(meta, TextualizationConfig(use_local=False))
    assert full.startswith(no_local)


def test_textualize_errors_when_nothing_enabled_or_empty():
    meta = ImageMeta(id="i7", caption="c")
    with pytest.raises(ValidationError):
        textualize_image(meta, TextualizationConfig(use_global=False, use_local=False))
    empty_global = ImageMeta(id="i8", caption="", objects=[ObjectAttr("o")])
    with pytest.raises(ValidationError):
        textualize_image(empty_global, TextualizationConfig(use_local=False))


def test_image_meta_requires_caption_or_objects():
    with pytest.raises(ValidationError):
        textualize_image(ImageMeta(id="i9", caption=""), CFG)


# --- build_contextual_question ---------------------------------------------

def test_contextual_question_empty_history_is_identity():
    q = build_contextual_question([], "capital of the US?", CFG)
    assert q.text == "capital of the US?"
    assert q.turn_count == 0


def test_contextual_question_renders_history_tags():
    history = [ConversationTurn("who won?", "Secretariat")]
    q = build_contextual_question(history, "what track?", CFG)
    assert q.text == "Q: who won? A: Secretariat Q: what track?"
    assert q.turn_count == 1


def test_contextual_question_window_drops_oldest():
    history = [ConversationTurn(f"q{i}", f"a{i}") for i in range(10)]
    q = build_contextual_question(history, "now?", CFG)
    assert q.turn_count == 8
    assert "q0" not in q.text and "q1" not in q.text
    assert q.text.startswith("Q: q2 A: a2")
    assert q.text.endswith("Q: now?")


def test_contextual_question_rejects_empty_current():
    with pytest.raises(ValidationError):
        build_contextual_question([], "", CFG)


# --- make_clue --------------------------------------------------------------

def test_make_clue_text_passthrough():
    doc = TextDoc(id="d1", text="The US capital is Washington.")
    clue = make_clue(doc, CFG)
    assert clue == Clue(id="d1", modality="text",
                        text="The US capital is Washington.", source_ref="d1")


def test_make_clue_text_title_prefix():
    doc = TextDoc(id="d2", text="Body.", title="Heading")
    assert make_clue(doc, CFG).text == "Heading. Body."


def test_make_clue_table_uses_linearizer():
    t = TableDoc(id="d3", header=["race", "track"],
                 rows=[["Santa Derby", "Santa Park"]])
    clue = make_clue(t, CFG)
    assert clue.modality == "table"
    assert clue.text == linearize_table(t)


def test_make_clue_image_uses_textualizer():
    meta = ImageMeta(id="d4", caption="horses racing",
                     objects=[ObjectAttr("horse", ["racing", "brown"])])
    clue = make_clue(meta, CFG)
    assert clue.modality == "image"
    assert clue.text == textualize_image(meta, CFG)
    assert clue.source_ref == "d4"
