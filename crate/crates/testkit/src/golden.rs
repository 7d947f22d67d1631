//! Reference prompt texts for the full configuration (abstracts, free-form
//! intent, example), with bracketed placeholders as slot values. Line
//! breaks in the typeset text are newlines; `--` stays as two hyphens.

pub const CITING: &str = "{Citing paper abstract}";
pub const CITED: &str = "{Cited paper abstract}";
pub const INTENT: &str = "{Intent of the paragraph}";
pub const EXAMPLE: &str = "{Example citation sentence}";

const DATA_LINES: &str = "Main paper abstract: {Citing paper abstract}
Relevant paper abstract: {Cited paper abstract}
Intent: {Intent of the paragraph}
Example: {Example citation sentence}";

/// `(template id, system, user)` for `N+A+IF+E`.
pub fn full_config_prompts() -> Vec<(u8, String, String)> {
    vec![
        (
            1,
            "Your aim is to generate an exactly single paragraph to be used in related work section in a main paper. You will be given the main paper's abstract and a relevant paper's abstract. The paragraph should reflect the intent and you need to refer the relevant paper in the same paragraph by using citation mark [REF#1]. You can inspire from the given example.".into(),
            DATA_LINES.into(),
        ),
        (
            2,
            String::new(),
            "Assume that you are the author of a paper whose abstract is as follows:
{Citing paper abstract}
In your paper's related work paragraph, you want to cite a paper whose abstract is as follows:
{Cited paper abstract}
Intent of the related work paragraph should be as follows:
{Intent of the paragraph}
You can inspire from the given example:
{Example citation sentence}
How would you write an exactly one related work paragraph for this purpose? While citing use the citation mark [REF#1]. Your output must strictly consist of the related work paragraph only, nothing else.".into(),
        ),
        (
            3,
            "Follow given instructions:
1-) You will be given main paper's abstract, a relevant paper's abstract, an intent and an example sentence.
2-) Write a related work paragraph that is belonging to main paper and citing relevant paper.
3-) The goal of your paragraph should be the given intent.
4-) You can utilize example sentence as how the relevant paper is cited before.
5-) Start your paragraph without any other explanations.
6-) Use [REF#1] as citation mark.
7-) Your output should consist of exactly single paragraph.".into(),
            DATA_LINES.into(),
        ),
        (
            4,
            "You are writing a research paper and want to discuss another, related paper, with a certain intent -- the purpose of the discussion. Generate exactly one paragraph of text that discusses the related paper in context of the main paper and follows the intent. You will be given the main paper abstract, the related paper's abstract, and the intent sentence. You can also utilize the given example sentence. Refer to the related paper by using a citation mark [REF#1]. You should generate exactly one paragraph of text, nothing else.".into(),
            DATA_LINES.into(),
        ),
        (
            5,
            "Imagine that you are a scientist writing a research paper. Your goal is to write a related work paragraph that discusses the related paper in context of your main paper. The related paper should be mentioned in the paragraph by using a citation mark [REF#1]. You will be given the main paper abstract, the related paper abstract, and the intent -- the reason why you are citing the paper. An example sentence is also given to show how the related paper has been cited before. Your output should consist of exactly one paragraph of text and include the citation mark.".into(),
            DATA_LINES.into(),
        ),
        (
            6,
            "You are given two research papers: main paper and related paper. Generate one paragraph of text that discusses the related paper in the context of the main paper, given the intent -- the reason why the main paper discusses the related paper. A citation sentence is also given to be taken as example. Use a citation mark [REF#1] to refer to the related paper. Your output should consist of exactly one paragraph of text and include the citation mark.".into(),
            DATA_LINES.into(),
        ),
    ]
}
