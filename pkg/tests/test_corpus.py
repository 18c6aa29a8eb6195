import json
import math

import pytest
from hypothesis import given, strategies as st

from corpus import Corpus, bm25_retrieve, bm25_scores, build_index, load_documents, load_queries, tokenize
from models import Document, Query, STATUS_EMPTY_QUERY

VOCABULARY = ['cervical', 'cancer', 'hpv', 'virus', 'screening', 'vaccine', 'cell', 'risk', 'test', 'women']


def oracle_bm25(documents, query_text, k1=0.9, b=0.4):
    """
    Scores every document directly from its token list, without the index.
    """
    tokens = {d.id: tokenize(d.text) for d in documents}
    n = len(documents)
    avg = sum(len(t) for t in tokens.values()) / n if n else 0.0
    avg = avg if avg > 0 else 1.0
    scores = {}
    for doc_id, terms in tokens.items():
        score = 0.0
        matched = False
        for term in tokenize(query_text):
            df = sum(1 for t in tokens.values() if term in t)
            if df == 0 or term not in terms:
                continue
            matched = True
            idf = math.log(1.0 + (n - df + 0.5) / (df + 0.5))
            tf = terms.count(term)
            norm = k1 * (1.0 - b + b * len(terms) / avg)
            score += idf * tf * (k1 + 1.0) / (tf + norm)
        if matched and score > 0:
            scores[doc_id] = score
    return sorted(scores.items(), key=lambda item: (-item[1], item[0]))


corpora = st.lists(st.lists(st.sampled_from(VOCABULARY), min_size=0, max_size=12), min_size=1, max_size=100)
query_terms = st.lists(st.sampled_from(VOCABULARY + ['absent']), min_size=1, max_size=4)


def to_documents(texts):
    return [Document('d{:03d}'.format(i), ' '.join(words)) for i, words in enumerate(texts)]


def test_tokenize():
    assert tokenize("Danville, CA.") == ['danville', 'ca']
    assert tokenize("") == []
    assert tokenize("HPV papillomavirus HPV") == ['hpv', 'papillomavirus', 'hpv']
    assert tokenize("snake_case and Ünïcode") == ['snake', 'case', 'and', 'ünïcode']


def test_build_index_postings():
    corpus = build_index([Document('d1', 'a b'), Document('d2', 'b c')])
    assert corpus.postings == {'a': [('d1', 1)], 'b': [('d1', 1), ('d2', 1)], 'c': [('d2', 1)]}
    assert corpus.avg_doc_length == 2
    assert corpus.documents['d1'].length == 2


def test_build_index_counts_term_frequency():
    corpus = build_index([Document('d', 'b b')])
    assert corpus.postings == {'b': [('d', 2)]}


def test_build_index_empty():
    corpus = build_index([])
    assert corpus.doc_count == 0
    assert corpus.avg_doc_length == 0


def test_build_index_rejects_duplicate_ids():
    with pytest.raises(ValueError, match='Duplicate document id: d1'):
        build_index([Document('d1', 'a'), Document('d1', 'b')])


def test_retrieve_absent_term_is_empty():
    corpus = build_index([Document('d1', 'a b'), Document('d2', 'b c')])
    ranked = bm25_retrieve(corpus, Query('q', 'zebra'), 10)
    assert len(ranked) == 0


def test_retrieve_one_document_corpus():
    corpus = build_index([Document('only', 'cervical cancer screening')])
    ranked = bm25_retrieve(corpus, Query('q', 'cancer'), 10)
    assert ranked.doc_ids() == ['only']
    assert ranked.entries[0][1] > 0


def test_retrieve_query_without_terms():
    corpus = build_index([Document('d1', 'a b')])
    ranked = bm25_retrieve(corpus, Query('q', '?!'), 10)
    assert len(ranked) == 0
    assert ranked.status == STATUS_EMPTY_QUERY


def test_retrieve_rejects_bad_depth():
    corpus = build_index([Document('d1', 'a b')])
    with pytest.raises(ValueError):
        bm25_retrieve(corpus, Query('q', 'a'), 0)


def test_retrieve_breaks_ties_by_doc_id():
    corpus = build_index([Document('b', 'x y'), Document('a', 'x y'), Document('c', 'z')])
    ranked = bm25_retrieve(corpus, Query('q', 'x'), 10)
    assert ranked.doc_ids() == ['a', 'b']
    assert ranked.entries[0][1] == ranked.entries[1][1]


def test_five_document_cancer_corpus_matches_hand_computation():
    documents = [
        Document('d1', 'cervical cancer is caused by hpv'),
        Document('d2', 'cancer screening saves lives'),
        Document('d3', 'the hpv vaccine prevents cervical cancer cervical'),
        Document('d4', 'lung disease and smoking'),
        Document('d5', 'cervical spine injury'),
    ]
    corpus = build_index(documents)
    ranked = bm25_retrieve(corpus, Query('q', 'cervical cancer'), 5)
    # N=5, avgdl=24/5; cervical df=3, cancer df=3.
    idf = math.log(1 + (5 - 3 + 0.5) / (3 + 0.5))

    def term(tf, length):
        return idf * tf * 1.9 / (tf + 0.9 * (0.6 + 0.4 * length / 4.8))

    expected = {
        'd1': term(1, 6) + term(1, 6),
        'd2': term(1, 4),
        'd3': term(2, 7) + term(1, 7),
        'd5': term(1, 3),
    }
    assert sorted(ranked.doc_ids()) == sorted(expected)
    for doc_id, score in ranked:
        assert score == pytest.approx(expected[doc_id], abs=1e-9)
    assert ranked.doc_ids()[0] == 'd3'


@given(corpora, query_terms, st.integers(min_value=1, max_value=120))
def test_retrieve_matches_exhaustive_oracle(texts, terms, depth):
    documents = to_documents(texts)
    corpus = build_index(documents)
    query_text = ' '.join(terms)
    ranked = bm25_retrieve(corpus, Query('q', query_text), depth)
    expected = oracle_bm25(documents, query_text)[:depth]
    assert ranked.doc_ids() == [doc_id for doc_id, _ in expected]
    for (_, score), (_, oracle_score) in zip(ranked.entries, expected):
        assert abs(score - oracle_score) < 1e-9


@given(st.lists(st.sampled_from(VOCABULARY), min_size=2, max_size=10), st.data())
def test_score_non_decreasing_in_term_frequency(words, data):
    index = data.draw(st.integers(min_value=0, max_value=len(words) - 1))
    boosted = list(words)
    boosted[index] = 'cervical'
    others = [Document('o1', 'cancer virus'), Document('o2', 'risk test women')]
    query = Query('q', 'cervical')
    before = bm25_scores(build_index([Document('d', ' '.join(words))] + others), query).get('d', 0.0)
    after = bm25_scores(build_index([Document('d', ' '.join(boosted))] + others), query).get('d', 0.0)
    assert after >= before


def test_retrieve_is_deterministic():
    documents = [Document('d{}'.format(i), 'hpv virus cell {}'.format('risk ' * i)) for i in range(10)]
    first = bm25_retrieve(build_index(documents), Query('q', 'hpv risk'), 5)
    second = bm25_retrieve(build_index(documents), Query('q', 'hpv risk'), 5)
    assert first == second


def test_corpus_save_and_load(tmp_path):
    corpus = build_index([Document('d1', 'a b b'), Document('d2', 'c')])
    path = str(tmp_path / 'index.json')
    corpus.save(path)
    loaded = Corpus.load(path)
    assert loaded.postings == corpus.postings
    assert loaded.avg_doc_length == corpus.avg_doc_length
    assert loaded.text('d1') == 'a b b'
    query = Query('q', 'b c')
    assert bm25_retrieve(loaded, query, 10) == bm25_retrieve(corpus, query, 10)


def test_unknown_document_text():
    with pytest.raises(ValueError):
        build_index([Document('d1', 'a')]).text('missing')


def test_load_documents_and_queries(tmp_path):
    corpus_path = tmp_path / 'corpus.jsonl'
    corpus_path.write_text(json.dumps({'_id': 'd1', 'text': 'alpha'}) + '\n\n' +
                           json.dumps({'_id': 2, 'text': 'beta'}) + '\n')
    queries_path = tmp_path / 'queries.tsv'
    queries_path.write_text('q1\tfirst query\nq2\tsecond\tquery\n')
    documents = load_documents(str(corpus_path))
    assert [d.id for d in documents] == ['d1', '2']
    queries = load_queries(str(queries_path))
    assert [(q.id, q.text) for q in queries] == [('q1', 'first query'), ('q2', 'second\tquery')]


def test_load_documents_rejects_malformed_line(tmp_path):
    path = tmp_path / 'corpus.jsonl'
    path.write_text('{"_id": "d1"}\n')
    with pytest.raises(ValueError, match='Malformed corpus line 1'):
        load_documents(str(path))


def test_load_queries_rejects_malformed_line(tmp_path):
    path = tmp_path / 'queries.tsv'
    path.write_text('q1 no tab\n')
    with pytest.raises(ValueError, match='Malformed query line 1'):
        load_queries(str(path))
