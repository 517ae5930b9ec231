use super::CorpusError;

/// Most probable language for a text.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    /// ISO 639-1 code when one exists, otherwise ISO 639-3.
    pub lang: String,
    pub confidence: f64,
}

/// Pluggable language identifier.
pub trait LanguageDetector: Send + Sync {
    fn name(&self) -> &str;

    /// `None` when the detector has no candidate for the text.
    fn detect(&self, text: &str) -> Option<Detection>;
}

/// Trigram detector backed by `whatlang`. Confidence is whatlang's own
/// reliability score in [0, 1].
#[derive(Debug, Default, Clone, Copy)]
pub struct WhatlangDetector;

impl LanguageDetector for WhatlangDetector {
    fn name(&self) -> &str {
        "whatlang"
    }

    fn detect(&self, text: &str) -> Option<Detection> {
        let info = whatlang::detect(text)?;
        Some(Detection {
            lang: short_code(info.lang()).to_string(),
            confidence: info.confidence().clamp(0.0, 1.0),
        })
    }
}

fn short_code(lang: whatlang::Lang) -> &'static str {
    use whatlang::Lang::*;
    match lang {
        Eng => "en",
        Spa => "es",
        Hin => "hi",
        Mal => "ml",
        Tam => "ta",
        Mar => "mr",
        Nep => "ne",
        Ben => "bn",
        Tel => "te",
        Kan => "kn",
        Guj => "gu",
        Pan => "pa",
        Ori => "or",
        Urd => "ur",
        Sin => "si",
        Fra => "fr",
        Deu => "de",
        Por => "pt",
        Ita => "it",
        Nld => "nl",
        Rus => "ru",
        Ara => "ar",
        Cmn => "zh",
        Jpn => "ja",
        Kor => "ko",
        other => other.code(),
    }
}

/// Run the configured detector on `text`.
pub fn detect_language(
    detector: Option<&dyn LanguageDetector>,
    text: &str,
) -> Result<Detection, CorpusError> {
    let detector = detector.ok_or(CorpusError::DetectorUnavailable)?;
    if text.trim().is_empty() {
        return Err(CorpusError::UndecidableText);
    }
    detector.detect(text).ok_or(CorpusError::UndecidableText)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn english_sentence() {
        let d = detect_language(
            Some(&WhatlangDetector),
            "this is a perfectly ordinary english sentence about weather",
        )
        .unwrap();
        assert_eq!(d.lang, "en");
    }

    #[test]
    fn devanagari_text_gets_a_devanagari_language() {
        let d = detect_language(
            Some(&WhatlangDetector),
            "मुझे यह फिल्म बहुत पसंद आई, सभी कलाकारों ने अच्छा काम किया है और कहानी भी शानदार है",
        )
        .unwrap();
        assert!(["hi", "mr", "ne"].contains(&d.lang.as_str()), "{d:?}");
        assert_eq!(d.lang, "hi");
    }

    #[test]
    fn empty_text_is_undecidable() {
        assert!(matches!(
            detect_language(Some(&WhatlangDetector), ""),
            Err(CorpusError::UndecidableText)
        ));
        assert!(matches!(
            detect_language(Some(&WhatlangDetector), "12345 !!!"),
            Err(CorpusError::UndecidableText)
        ));
    }

    #[test]
    fn missing_detector() {
        assert!(matches!(
            detect_language(None, "hello there"),
            Err(CorpusError::DetectorUnavailable)
        ));
    }
}
