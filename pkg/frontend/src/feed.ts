// Recommendation feed: one section per day, cards in rank order.
// Title clicks are logged before navigation, saves toggle optimistically
// and roll back if the server disagrees.

import { FeedItem, getFeed, recordAction } from "./api.js";
import { clear, el, renderExplanation } from "./markup.js";
import { buildFeedbackForm } from "./feedback.js";

const EXPLANATION_TOGGLE = "Why am I being recommended this article?";

function buildCard(impressionId: string, item: FeedItem): HTMLElement {
  const card = el("article", "card");

  const title = el("h3", "card-title");
  const link = el("a", "", item.title) as HTMLAnchorElement;
  link.href = item.url;
  link.target = "_blank";
  link.rel = "noopener";
  let clickLogged = false;
  link.addEventListener("click", () => {
    // One log line per click; navigation proceeds regardless of
    // whether the action call lands.
    if (clickLogged) {
      return;
    }
    clickLogged = true;
    recordAction(impressionId, item.article_id, "clicked_web")
      .catch(() => undefined)
      .finally(() => {
        clickLogged = false;
      });
  });
  title.appendChild(link);
  card.appendChild(title);

  card.appendChild(el("p", "card-authors", item.authors.join(", ")));
  card.appendChild(el("p", "card-abstract", item.abstract));

  const controls = el("div", "card-controls");

  const saveButton = el("button", "save-toggle", item.saved ? "Saved" : "Save") as HTMLButtonElement;
  let saved = item.saved;
  saveButton.addEventListener("click", () => {
    const wanted = !saved;
    saved = wanted;
    saveButton.textContent = wanted ? "Saved" : "Save";
    recordAction(impressionId, item.article_id, wanted ? "saved" : "unsave").catch(() => {
      saved = !wanted;
      saveButton.textContent = saved ? "Saved" : "Save";
    });
  });
  controls.appendChild(saveButton);

  const whyButton = el("button", "why-toggle", EXPLANATION_TOGGLE) as HTMLButtonElement;
  const explanation = el("p", "card-explanation");
  explanation.innerHTML = renderExplanation(item.explanation);
  explanation.hidden = true;
  whyButton.addEventListener("click", () => {
    explanation.hidden = !explanation.hidden;
  });
  controls.appendChild(whyButton);

  const feedbackButton = el("button", "feedback-toggle", "Give feedback") as HTMLButtonElement;
  const feedbackSlot = el("div", "feedback-slot");
  feedbackSlot.hidden = true;
  feedbackButton.addEventListener("click", () => {
    if (feedbackSlot.hidden && !feedbackSlot.firstChild) {
      feedbackSlot.appendChild(buildFeedbackForm(item.article_id));
    }
    feedbackSlot.hidden = !feedbackSlot.hidden;
  });
  controls.appendChild(feedbackButton);

  card.appendChild(controls);
  card.appendChild(explanation);
  card.appendChild(feedbackSlot);
  return card;
}

export async function renderFeed(root: HTMLElement, page = 1): Promise<void> {
  clear(root);
  const status = el("p", "status", "Loading your feed...");
  root.appendChild(status);

  let feed;
  try {
    feed = await getFeed(page);
  } catch (err) {
    status.textContent = err instanceof Error ? err.message : "could not load feed";
    return;
  }
  clear(root);

  if (feed.impressions.length === 0) {
    root.appendChild(el("p", "status", "No recommendations yet. Check back after the next daily run."));
    return;
  }

  for (const group of feed.impressions) {
    const section = el("section", "feed-day");
    section.appendChild(el("h2", "feed-date", group.date));
    for (const item of group.items) {
      section.appendChild(buildCard(group.impression_id, item));
    }
    root.appendChild(section);
  }

  if (feed.total_pages > 1) {
    const pager = el("nav", "pager");
    if (feed.page > 1) {
      const prev = el("button", "", "Newer") as HTMLButtonElement;
      prev.addEventListener("click", () => renderFeed(root, feed.page - 1));
      pager.appendChild(prev);
    }
    pager.appendChild(el("span", "pager-label", `Page ${feed.page} of ${feed.total_pages}`));
    if (feed.page < feed.total_pages) {
      const next = el("button", "", "Older") as HTMLButtonElement;
      next.addEventListener("click", () => renderFeed(root, feed.page + 1));
      pager.appendChild(next);
    }
    root.appendChild(pager);
  }
}
