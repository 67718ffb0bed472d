import os
from datetime import datetime
try:
    import markdown
    MARKDOWN_AVAILABLE = True
except ImportError:
    MARKDOWN_AVAILABLE = False


def markdown_to_html(markdown_text):
    """Convert markdown to HTML"""
    if not markdown_text:
        return ""

    if MARKDOWN_AVAILABLE:
        return markdown.markdown(markdown_text, extensions=["tables"])
    else:
        # Fallback: just replace line breaks
        return markdown_text.replace('\n', '<br>')


def markdown_table(header, rows):
    """Render a list of rows as a markdown pipe table"""
    lines = ["| " + " | ".join(str(h) for h in header) + " |",
             "|" + "|".join(" --- " for _ in header) + "|"]
    for row in rows:
        lines.append("| " + " | ".join(_cell(v) for v in row) + " |")
    return "\n".join(lines)


def _cell(value):
    if isinstance(value, float):
        return f"{value:.6g}"
    if value is None:
        return "-"
    return str(value)


def render_markdown(title, sections):
    """Join (heading, body) pairs under a title"""
    parts = [f"# {title}", ""]
    for heading, body in sections:
        parts.extend([f"## {heading}", "", body.strip(), ""])
    return "\n".join(parts)


def generate_report(title, sections, out_dir):
    """Write report.md and report.html into out_dir; returns both paths"""
    os.makedirs(out_dir, exist_ok=True)
    markdown_text = render_markdown(title, sections)

    md_path = os.path.join(out_dir, "report.md")
    with open(md_path, 'w', encoding='utf-8') as f:
        f.write(markdown_text)

    generated_at = datetime.now().strftime('%Y-%m-%d %H:%M:%S')
    html_content = f"""<!DOCTYPE html>
<html>
<head>
    <meta charset="utf-8">
    <title>{title}</title>
    <style>
        body {{ font-family: Arial, sans-serif; margin: 40px; line-height: 1.6; color: #333333; }}
        table {{ border-collapse: collapse; }}
        th, td {{ padding: 6px 10px; border: 1px solid #ddd; text-align: right; }}
        th {{ background: #f0f0f0; }}
        .footer {{ margin-top: 40px; font-size: 0.85em; color: #777; }}
    </style>
</head>
<body>
    {markdown_to_html(markdown_text)}
    <div class="footer">Generated {generated_at}</div>
</body>
</html>
"""
    html_path = os.path.join(out_dir, "report.html")
    with open(html_path, 'w', encoding='utf-8') as f:
        f.write(html_content)

    return md_path, html_path


if __name__ == "__main__":
    table = markdown_table(["omega", "error"], [[100.0, 0.12], [400.0, 0.03]])
    paths = generate_report("Sweep", [("Approximation error", table)], "out/report_demo")
    print(f"Report generated: {paths}")
