use crate::interface::InterfaceMethod;

/// Case-insensitive substring match against any term.
pub fn is_suspicious(name: &str, terms: &[String]) -> bool {
    let name = name.to_lowercase();
    terms
        .iter()
        .any(|t| !t.is_empty() && name.contains(&t.to_lowercase()))
}

pub fn flag_suspicious_interface_names<'a>(
    methods: impl IntoIterator<Item = &'a InterfaceMethod>,
    terms: &[String],
) -> Vec<InterfaceMethod> {
    methods
        .into_iter()
        .filter(|m| is_suspicious(&m.sig.name, terms))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taint::SourceSinkConfig;

    #[test]
    fn default_terms() {
        let terms = SourceSinkConfig::default_config().suspicious_method_terms();
        assert!(is_suspicious("getUserPwd", &terms));
        assert!(is_suspicious("getPhoneNumber", &terms));
        assert!(!is_suspicious("bar", &terms));
    }
}
