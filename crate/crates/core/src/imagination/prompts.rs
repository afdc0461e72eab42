//! Prompt templates. These strings are compared byte-for-byte against golden
//! files; do not reflow them.

pub const SYSTEM_PROMPT: &str = "You are an average book reader.";

pub const SUMMARY_FIRST_PROMPT: &str = "Here is the first chapter of a book. Provide an extensive summary of the chapter. Focus on the characters, their actions and emotions, and events in a coherent and consistent way without making assumptions. Don\u{2019}t start with sentences mentioning the chapter or the book \u{2014} such as 'In this chapter'; get right into the summary.";

pub const SUMMARY_NEXT_PROMPT: &str = "Here are the summary of the previous chapters of a book you have read, and the entire text of a new chapter. Provide an extensive summary of the entire book based on the previous chapters and the new chapter. Focus on the characters, their actions and emotions, and events in a coherent and consistent way without making assumptions. Don\u{2019}t start with sentences mentioning the chapter or the book \u{2014} such as 'In this chapter'; get right into the summary.";

pub const IMAGINE_FIRST_TEMPLATE: &str = "You have read and understood the first chapter of a book, and now I will provide you with the text of this chapter. Here is the first chapter: {chapter text}. Based on this, please imagine the plot for the remaining chapters, weaving together the characters, their actions and emotions, and events in a coherent and consistent way. Then, summarize this plot into a set of 20 simple and distinct bullet points.";

pub const IMAGINE_NEXT_TEMPLATE: &str = "You have read and understood the previous chapters of a book, and now I will provide you with a summary of those chapters, along with the text from the most recent chapter. Here is the summary of the previous chapters: {summary}. Here is the current chapter: {chapter text}. Based on this, please imagine the plot for the remaining chapters, weaving together the characters, their actions and emotions, and events in a coherent and consistent way. Then, summarize this plot into a set of 20 simple and distinct bullet points.";

/// Summarizer prompt for the first chapter: instructions, then the text.
pub fn summary_first_prompt(chapter_text: &str) -> String {
    format!("{SUMMARY_FIRST_PROMPT}\n\n{chapter_text}")
}

/// Summarizer prompt folding a new chapter into the running summary.
pub fn summary_next_prompt(previous_summary: &str, chapter_text: &str) -> String {
    format!(
        "{SUMMARY_NEXT_PROMPT}\n\nSummary of the previous chapters: {previous_summary}\n\nNew chapter: {chapter_text}"
    )
}

pub fn imagine_first_prompt(chapter_text: &str) -> String {
    IMAGINE_FIRST_TEMPLATE.replace("{chapter text}", chapter_text)
}

pub fn imagine_next_prompt(summary: &str, chapter_text: &str) -> String {
    // Substitute the chapter first so a summary containing the literal
    // placeholder text is left alone.
    let (head, tail) = IMAGINE_NEXT_TEMPLATE
        .split_once("{summary}")
        .expect("template has a summary slot");
    format!("{head}{summary}{}", tail.replace("{chapter text}", chapter_text))
}

/// Words the fixed template parts occupy, for context-budget accounting.
pub fn template_words(first: bool) -> usize {
    let t = if first { IMAGINE_FIRST_TEMPLATE } else { IMAGINE_NEXT_TEMPLATE };
    crate::text::word_count(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitution_leaves_no_placeholders() {
        let p = imagine_next_prompt("S {chapter text}", "C");
        assert!(p.contains("previous chapters: S {chapter text}. Here is the current chapter: C. Based"));
        let p = imagine_first_prompt("C");
        assert!(p.contains("Here is the first chapter: C. Based on this"));
        assert!(!p.contains('{'));
    }

    #[test]
    fn templates_use_typographic_marks() {
        assert!(SUMMARY_FIRST_PROMPT.contains("Don\u{2019}t"));
        assert!(SUMMARY_NEXT_PROMPT.contains(" \u{2014} such as"));
        assert!(IMAGINE_FIRST_TEMPLATE.ends_with("20 simple and distinct bullet points."));
    }
}
