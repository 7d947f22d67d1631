//! Deterministic synthetic corpus. `fixtures/corpus.jsonl` is the output of
//! [`corpus_jsonl`]; a test keeps the two in sync.

use serde_json::{json, Value};

struct Cited {
    id: &'static str,
    title: &'static str,
    author: &'static str,
    year: i32,
    method: &'static str,
    task: &'static str,
    abstract_text: &'static str,
}

const CITED: &[Cited] = &[
    Cited {
        id: "C15-1001",
        title: "Transition-based dependency parsing with stack recurrent networks",
        author: "Dyer et al.",
        year: 2015,
        method: "a stack recurrent network for transition-based parsing",
        task: "dependency parsing",
        abstract_text: "We propose a technique for learning representations of parser states in transition-based dependency parsers. Our primary innovation is a new control structure for sequence-to-sequence neural networks, the stack recurrent network. It yields state-of-the-art accuracy on English and Chinese treebanks.",
    },
    Cited {
        id: "C16-1002",
        title: "Neural architectures for named entity recognition",
        author: "Lample et al.",
        year: 2016,
        method: "a bidirectional recurrent tagger with a conditional random field layer",
        task: "named entity recognition",
        abstract_text: "State-of-the-art named entity recognition systems rely heavily on hand-crafted features. We introduce two neural architectures, one based on bidirectional recurrent networks and conditional random fields, and one inspired by shift-reduce parsers. Our models obtain strong performance in four languages without language-specific resources.",
    },
    Cited {
        id: "C17-1003",
        title: "Get to the point: summarization with pointer-generator networks",
        author: "See et al.",
        year: 2017,
        method: "a pointer-generator network with a coverage mechanism",
        task: "abstractive summarization",
        abstract_text: "Neural sequence-to-sequence models provide a viable new approach for abstractive text summarization. We propose a hybrid pointer-generator network that can copy words from the source text while retaining the ability to produce novel words, and a coverage mechanism that discourages repetition.",
    },
    Cited {
        id: "C18-1004",
        title: "Deep contextualized word representations",
        author: "Peters et al.",
        year: 2018,
        method: "deep contextual word vectors from a bidirectional language model",
        task: "transfer learning for language understanding",
        abstract_text: "We introduce a new type of deep contextualized word representation that models complex characteristics of word use and how these uses vary across linguistic contexts. Our vectors are learned functions of the internal states of a deep bidirectional language model pretrained on a large text corpus.",
    },
    Cited {
        id: "C14-1005",
        title: "Neural machine translation by jointly learning to align and translate",
        author: "Bahdanau et al.",
        year: 2014,
        method: "an attention mechanism that learns soft alignments",
        task: "neural machine translation",
        abstract_text: "Neural machine translation is a recently proposed approach to machine translation. We conjecture that the use of a fixed-length vector is a bottleneck and propose to extend the encoder-decoder architecture by allowing a model to automatically soft-search for parts of a source sentence relevant to predicting a target word.",
    },
    Cited {
        id: "C19-1006",
        title: "Pretraining deep bidirectional transformers for language understanding",
        author: "Devlin et al.",
        year: 2019,
        method: "masked language model pretraining of deep bidirectional transformers",
        task: "sentence classification and question answering",
        abstract_text: "We introduce a new language representation model designed to pretrain deep bidirectional representations from unlabeled text by jointly conditioning on both left and right context in all layers. The pretrained model can be fine-tuned with just one additional output layer for a wide range of tasks.",
    },
    Cited {
        id: "C16-1007",
        title: "SQuAD: one hundred thousand questions for machine comprehension of text",
        author: "Rajpurkar et al.",
        year: 2016,
        method: "a large reading comprehension dataset built from encyclopedia articles",
        task: "extractive question answering",
        abstract_text: "We present a new reading comprehension dataset consisting of questions posed by crowdworkers on a set of encyclopedia articles, where the answer to each question is a segment of text from the corresponding passage. We build a strong logistic regression model and analyze the reasoning types required.",
    },
    Cited {
        id: "C17-1008",
        title: "Attention is all you need",
        author: "Vaswani et al.",
        year: 2017,
        method: "the transformer architecture based solely on attention",
        task: "sequence transduction",
        abstract_text: "The dominant sequence transduction models are based on complex recurrent or convolutional neural networks. We propose a new simple network architecture, the transformer, based solely on attention mechanisms, dispensing with recurrence and convolutions entirely, and achieve superior translation quality with less training time.",
    },
];

const FOCUS: &[&str] = &[
    "low-resource languages",
    "scientific documents",
    "noisy social media text",
    "clinical notes",
    "legal contracts",
    "dialogue transcripts",
];

const INTENTS: &[&str] = &[
    "Background",
    "Motivation",
    "Uses",
    "Extends",
    "CompareOrContrast",
    "FutureWork",
];

/// Citation-sentence patterns; `{m}` is the mark, `{x}` the method, `{t}` the task.
const CITE_SENTENCES: &[&str] = &[
    "{m} proposed {x} for {t} and reported clear gains over strong earlier baselines on standard benchmarks.",
    "Following {m}, we adopt {x} as the backbone of our {t} system and keep its original training recipe.",
    "Unlike {m}, who rely on {x} for {t}, our approach avoids large labelled training sets entirely.",
    "The closest work to ours is {m}, which applies {x} to {t} with careful analysis of the typical errors.",
];

fn citing_id(k: usize) -> String {
    format!("P{}-{:04}", 18 + k % 4, 1100 + k)
}

fn mark(c: &Cited) -> String {
    format!("<cite>{} ({})</cite>", c.author, c.year)
}

fn plain_mark(c: &Cited) -> String {
    format!("{} ({})", c.author, c.year)
}

fn citing_title(k: usize) -> String {
    let c = &CITED[k % CITED.len()];
    format!("Revisiting {} for {} (study {})", c.task, FOCUS[k % FOCUS.len()], k + 1)
}

fn citing_abstract(k: usize) -> String {
    let c = &CITED[k % CITED.len()];
    let focus = FOCUS[k % FOCUS.len()];
    format!(
        "We study {task} on {focus}, a setting where existing systems degrade sharply. \
         We build a new evaluation set of {n} annotated documents and compare several neural models. \
         Our analysis shows that domain shift, rather than model size, explains most of the errors, \
         and we release code and data to support further research.",
        task = c.task,
        n = 200 + 37 * k,
    )
}

/// Paragraph markup and plain text for citing paper `k` citing `cited`.
fn paragraph(k: usize, cited: &[&Cited]) -> (String, String) {
    let first = cited[0];
    let focus = FOCUS[k % FOCUS.len()];
    let opener = format!(
        "Research on {} has grown quickly in recent years, and most systems now depend on large annotated resources.",
        first.task
    );
    let mut cite_sentences = Vec::new();
    for (i, c) in cited.iter().enumerate() {
        let pattern = CITE_SENTENCES[(k + i) % CITE_SENTENCES.len()];
        cite_sentences.push(
            pattern
                .replace("{x}", c.method)
                .replace("{t}", c.task),
        );
    }
    let closer = format!(
        "Our work differs because we focus on {focus} and evaluate with a broader set of metrics than prior studies."
    );
    let build = |m: &dyn Fn(&Cited) -> String| {
        let mut parts = vec![opener.clone()];
        for (s, c) in cite_sentences.iter().zip(cited) {
            let s = s.replace("{m}", &m(c));
            parts.push(s);
        }
        parts.push(closer.clone());
        parts.join(" ")
    };
    (build(&mark), build(&plain_mark))
}

fn record(k: usize, cited: &[&Cited], section: &str) -> Value {
    let (xml, plain) = paragraph(k, cited);
    json!({
        "acl_id": citing_id(k),
        "title": citing_title(k),
        "abstract": citing_abstract(k),
        "year": 2018 + (k % 4) as i32,
        "language": "en",
        "section_title": section,
        "paragraph": plain,
        "paragraph_xml": xml,
        "cited_paper_marks": cited.iter().map(|c| mark(c)).collect::<Vec<_>>(),
        "cited_paper_titles": cited.iter().map(|c| c.title).collect::<Vec<_>>(),
        "cited_papers_acl_ids": cited.iter().map(|c| c.id).collect::<Vec<_>>(),
        "cited_papers_abstracts": cited.iter().map(|c| c.abstract_text).collect::<Vec<_>>(),
        "cited_papers_years": cited.iter().map(|c| c.year).collect::<Vec<_>>(),
        "categorical_intent": INTENTS[k % INTENTS.len()],
        "publisher": "Association for Computational Linguistics",
        "booktitle": format!("Proceedings of Workshop {}", 1 + k % 5),
    })
}

/// Record whose plain paragraph has exactly `n` whitespace words.
fn sized_record(k: usize, n: usize) -> Value {
    let c = &CITED[k % CITED.len()];
    let head = format!(
        "{} applied {} to {} and found consistent improvements across all of the evaluated settings.",
        mark(c),
        c.method,
        c.task
    );
    let head_plain = head.replace(&mark(c), &plain_mark(c));
    let have = head_plain.split_whitespace().count();
    assert!(have < n, "sized record needs at least {have} words");
    let filler: Vec<String> = (0..n - have).map(|i| format!("filler{i}")).collect();
    let tail = format!(" {}", filler.join(" "));
    let mut r = record(k, &[c], "Related Work");
    r["paragraph_xml"] = json!(format!("{head}{tail}"));
    r["paragraph"] = json!(format!("{head_plain}{tail}"));
    r
}

pub const SINGLE_CITATION_RECORDS: usize = 30;

/// Expected per-rule counts for the generated corpus.
pub struct FixtureCounts {
    pub raw: usize,
    pub kept: usize,
    pub single_citation: usize,
    pub malformed: usize,
    pub corrupted: usize,
    pub non_english: usize,
    pub section_title: usize,
    pub short_paragraph: usize,
    pub duplicate: usize,
}

pub const COUNTS: FixtureCounts = FixtureCounts {
    raw: 30 + 3 + 2 + 7,
    kept: 30 + 3 + 1,
    single_citation: 30 + 1,
    malformed: 1,
    corrupted: 2,
    non_english: 1,
    section_title: 1,
    short_paragraph: 1,
    duplicate: 2,
};

pub fn corpus_records() -> Vec<String> {
    let mut lines: Vec<String> = Vec::new();
    let sections = ["Related Work", "related work", "Background", "Previous Work", " RELATED WORKS "];
    for k in 0..SINGLE_CITATION_RECORDS {
        let c = &CITED[k % CITED.len()];
        lines.push(record(k, &[c], sections[k % sections.len()]).to_string());
    }
    // multi-citation paragraphs: kept by ingestion, filtered before prompting
    for k in 30..33 {
        let a = &CITED[k % CITED.len()];
        let b = &CITED[(k + 3) % CITED.len()];
        lines.push(record(k, &[a, b], "Related Work").to_string());
    }
    // word-count boundary: 40 words kept, 39 removed
    lines.push(sized_record(33, 40).to_string());
    lines.push(sized_record(34, 39).to_string());

    let mut intro = record(35, &[&CITED[1]], "Introduction");
    intro["acl_id"] = json!(citing_id(35));
    lines.push(intro.to_string());

    let mut german = record(36, &[&CITED[2]], "Related Work");
    german["language"] = json!("de");
    lines.push(german.to_string());

    // same paper under a second id
    let mut dup = record(0, &[&CITED[0]], "Related Work");
    dup["acl_id"] = json!("P18-9999");
    dup["paragraph"] = json!(format!("{} Extra sentence.", dup["paragraph"].as_str().unwrap()));
    dup["paragraph_xml"] = json!(format!("{} Extra sentence.", dup["paragraph_xml"].as_str().unwrap()));
    lines.push(dup.to_string());
    // exact repeat of an earlier paragraph
    lines.push(record(1, &[&CITED[1]], "Related Work").to_string());

    lines.push(r#"{"acl_id": "P20-0001", "title": "Truncated"#.to_string());

    let mut missing_mark = record(37, &[&CITED[3]], "Related Work");
    missing_mark["cited_paper_marks"] = json!(["<cite>Nobody (1999)</cite>"]);
    lines.push(missing_mark.to_string());

    let mut ragged = record(38, &[&CITED[4]], "Related Work");
    ragged["cited_papers_abstracts"] = json!([]);
    lines.push(ragged.to_string());

    lines
}

pub fn corpus_jsonl() -> String {
    let mut s = corpus_records().join("\n");
    s.push('\n');
    s
}
