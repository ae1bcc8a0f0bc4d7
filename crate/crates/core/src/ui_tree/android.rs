use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::{normalize_text, Bounds, Flag, TreeError, TreeSource, UINode, UITree};

fn line_of(document: &str, offset: u64) -> usize {
    let end = (offset as usize).min(document.len());
    document.as_bytes()[..end].iter().filter(|b| **b == b'\n').count() + 1
}

/// Parses a uiautomator-style accessibility dump.
///
/// The node tag is the `class` attribute when present (uiautomator names every
/// element `node`), otherwise the element name. Attributes that are not mapped
/// onto text, flags or bounds are kept verbatim.
pub fn parse_android_xml(document: &str) -> Result<UITree, TreeError> {
    let mut reader = Reader::from_str(document);
    reader.config_mut().trim_text(true);

    let mut stack: Vec<UINode> = Vec::new();
    let mut root: Option<UINode> = None;

    loop {
        let event = reader.read_event().map_err(|e| TreeError::MalformedDocument {
            line: line_of(document, reader.error_position()),
            detail: e.to_string(),
        })?;
        match event {
            Event::Start(start) => {
                let node = node_from_element(&start, document, &reader)?;
                if root.is_some() && stack.is_empty() {
                    return Err(TreeError::MalformedDocument {
                        line: line_of(document, reader.buffer_position()),
                        detail: "more than one root element".into(),
                    });
                }
                stack.push(node);
            }
            Event::Empty(start) => {
                let node = node_from_element(&start, document, &reader)?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(node),
                    None if root.is_none() => root = Some(node),
                    None => {
                        return Err(TreeError::MalformedDocument {
                            line: line_of(document, reader.buffer_position()),
                            detail: "more than one root element".into(),
                        })
                    }
                }
            }
            Event::End(_) => {
                let node = stack.pop().ok_or_else(|| TreeError::MalformedDocument {
                    line: line_of(document, reader.buffer_position()),
                    detail: "unbalanced closing tag".into(),
                })?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(node),
                    None => root = Some(node),
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }

    if !stack.is_empty() {
        return Err(TreeError::MalformedDocument {
            line: line_of(document, document.len() as u64),
            detail: format!("{} unclosed element(s) at end of document", stack.len()),
        });
    }
    let root = root.ok_or(TreeError::EmptyTree)?;
    Ok(UITree::new(root, TreeSource::AndroidXml))
}

fn node_from_element(
    start: &BytesStart<'_>,
    document: &str,
    reader: &Reader<&[u8]>,
) -> Result<UINode, TreeError> {
    let element = String::from_utf8_lossy(start.name().as_ref()).into_owned();
    let mut node = UINode::new(element);
    let mut class: Option<String> = None;
    let mut visible_seen = false;

    for attr in start.attributes() {
        let attr = attr.map_err(|e| TreeError::MalformedDocument {
            line: line_of(document, reader.buffer_position()),
            detail: e.to_string(),
        })?;
        let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
        let value = attr
            .unescape_value()
            .map_err(|e| TreeError::MalformedDocument {
                line: line_of(document, reader.buffer_position()),
                detail: e.to_string(),
            })?
            .into_owned();
        let flag = match key.as_str() {
            "text" => {
                node.text = normalize_text(&value);
                continue;
            }
            "class" => {
                class = Some(value);
                continue;
            }
            "bounds" => {
                node.bounds = Some(Bounds::parse(&value)?);
                continue;
            }
            "clickable" => Flag::Clickable,
            "long-clickable" => Flag::LongClickable,
            "focusable" => Flag::Focusable,
            "enabled" => Flag::Enabled,
            "scrollable" => Flag::Scrollable,
            "checkable" => Flag::Checkable,
            "editable" => Flag::Editable,
            "visible-to-user" => {
                visible_seen = true;
                Flag::Visible
            }
            _ => {
                node.attributes.insert(key, value);
                continue;
            }
        };
        node.flags.set(flag, value == "true");
    }

    // Older dumps omit visible-to-user; everything in such a dump is on screen.
    if !visible_seen {
        node.flags.insert(Flag::Visible);
    }
    if let Some(class) = class.filter(|c| !c.is_empty()) {
        node.tag = class;
    }
    if node.tag.ends_with("EditText") {
        node.flags.insert(Flag::Editable);
    }
    Ok(node)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SEVEN: &str = r#"<?xml version='1.0' encoding='UTF-8' standalone='yes' ?>
<hierarchy rotation="0">
  <node index="0" text="" class="android.widget.FrameLayout" clickable="false" enabled="true" bounds="[0,0][1080,2340]">
    <node index="0" text="" class="android.widget.LinearLayout" bounds="[0,210][1080,420]">
      <node index="0" text="Bill  Amount" resource-id="com.tip:id/label" class="android.widget.TextView" bounds="[0,210][540,420]" />
      <node index="1" text="0.00" class="android.widget.EditText" clickable="true" focusable="true" bounds="[540,210][1080,420]" />
    </node>
    <node index="1" text="Calculate" class="android.widget.Button" clickable="true" bounds="[0,420][1080,630]" />
    <node index="2" text="" content-desc="More options" class="android.widget.ImageButton" clickable="true" visible-to-user="false" bounds="[960,0][1080,120]" />
  </node>
</hierarchy>"#;

    #[test]
    fn seven_element_dump() {
        let tree = parse_android_xml(SEVEN).unwrap();
        assert_eq!(tree.node_count, 7);
        assert_eq!(tree.source, TreeSource::AndroidXml);
        let ids: Vec<usize> = tree.iter().map(|n| n.node_id).collect();
        assert_eq!(ids, (0..7).collect::<Vec<_>>());
        assert_eq!(tree.root.tag, "hierarchy");
        assert_eq!(tree.root.attributes["rotation"], "0");

        let label = tree.node(3).unwrap();
        assert_eq!(label.tag, "android.widget.TextView");
        assert_eq!(label.text, "Bill Amount");
        assert_eq!(label.attributes["resource-id"], "com.tip:id/label");
        assert_eq!(label.bounds, Bounds::new(0, 210, 540, 420));
        assert_eq!(label.depth, 3);

        let input = tree.node(4).unwrap();
        assert!(input.flags.contains(Flag::Editable));
        assert!(input.flags.contains(Flag::Clickable));

        let more = tree.node(6).unwrap();
        assert!(!more.flags.contains(Flag::Visible));
        assert_eq!(more.attributes["content-desc"], "More options");
    }

    #[test]
    fn bounds_attribute_maps_verbatim() {
        let t = parse_android_xml(r#"<node class="X" bounds="[0,0][1080,210]"/>"#).unwrap();
        assert_eq!(t.root.bounds, Some(Bounds { x1: 0, y1: 0, x2: 1080, y2: 210 }));
    }

    #[test]
    fn error_cases() {
        assert_eq!(parse_android_xml("<?xml version='1.0'?>"), Err(TreeError::EmptyTree));
        assert_eq!(parse_android_xml(""), Err(TreeError::EmptyTree));
        assert!(matches!(
            parse_android_xml(r#"<node bounds="[0,0]"/>"#),
            Err(TreeError::MalformedBounds { .. })
        ));
        assert!(matches!(
            parse_android_xml("<a><b></a>"),
            Err(TreeError::MalformedDocument { .. })
        ));
        assert!(matches!(
            parse_android_xml("<a><b/>"),
            Err(TreeError::MalformedDocument { .. })
        ));
        assert!(matches!(
            parse_android_xml("<a/><b/>"),
            Err(TreeError::MalformedDocument { .. })
        ));
    }
}
