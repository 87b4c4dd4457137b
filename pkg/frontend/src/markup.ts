// Small HTML helpers. Everything that ends up in innerHTML passes
// through escapeHtml first; article fields are never trusted.

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

// Explanations arrive as plain text with **term** spans marking the
// matched topics. Only that marker becomes markup; the rest is escaped,
// so a title like "<script>alert(1)</script>" stays inert text.
export function renderExplanation(explanation: string): string {
  const parts = explanation.split("**");
  const out: string[] = [];
  for (let i = 0; i < parts.length; i++) {
    const escaped = escapeHtml(parts[i] ?? "");
    // Odd segments sit between a pair of markers; a segment after an
    // unbalanced trailing marker is always last and stays plain.
    if (i % 2 === 1 && i < parts.length - 1) {
      out.push(`<b>${escaped}</b>`);
    } else {
      out.push(escaped);
    }
  }
  return out.join("");
}

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

export function clear(node: HTMLElement): void {
  while (node.firstChild) {
    node.removeChild(node.firstChild);
  }
}
