// Per-article feedback form: five rating scales and a free-text box.
// Relevance is the only required rating; the rest may stay blank.

import { ApiError, submitFeedback } from "./api.js";
import { el } from "./markup.js";

interface RatingSpec {
  field: string;
  label: string;
}

const RATINGS: RatingSpec[] = [
  { field: "relevance", label: "How relevant is this article to you?" },
  { field: "explanation_satisfaction", label: "How satisfied are you with the explanation?" },
  { field: "persuasiveness", label: "Did the explanation make you want to read the article?" },
  { field: "transparency", label: "Does the explanation show why this was recommended?" },
  { field: "scrutability", label: "Does the explanation help you correct the system?" },
];

function ratingRow(articleId: string, spec: RatingSpec): HTMLElement {
  const row = el("fieldset", "rating-row");
  row.appendChild(el("legend", "", spec.label));
  const name = `${spec.field}:${articleId}`;
  for (let value = 1; value <= 5; value++) {
    const label = el("label", "rating-option");
    const input = el("input") as HTMLInputElement;
    input.type = "radio";
    input.name = name;
    input.value = String(value);
    input.dataset["field"] = spec.field;
    label.appendChild(input);
    label.appendChild(document.createTextNode(String(value)));
    row.appendChild(label);
  }
  return row;
}

function readRating(form: HTMLElement, field: string): number | null {
  const checked = form.querySelector<HTMLInputElement>(
    `input[data-field="${field}"]:checked`,
  );
  return checked ? Number(checked.value) : null;
}

export function buildFeedbackForm(articleId: string, onDone?: () => void): HTMLFormElement {
  const form = el("form", "feedback-form") as HTMLFormElement;
  for (const spec of RATINGS) {
    form.appendChild(ratingRow(articleId, spec));
  }

  const freeText = el("textarea", "feedback-text") as HTMLTextAreaElement;
  freeText.placeholder = "Anything else you want to tell us?";
  form.appendChild(freeText);

  const submit = el("button", "feedback-submit", "Send feedback") as HTMLButtonElement;
  submit.type = "submit";
  form.appendChild(submit);

  const status = el("p", "feedback-status");
  form.appendChild(status);

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const relevance = readRating(form, "relevance");
    if (relevance === null) {
      status.textContent = "Please rate relevance before sending.";
      status.className = "feedback-status error";
      return;
    }
    submit.disabled = true;
    submitFeedback({
      kind: "recommendation_feedback",
      article_id: articleId,
      relevance,
      explanation_satisfaction: readRating(form, "explanation_satisfaction"),
      persuasiveness: readRating(form, "persuasiveness"),
      transparency: readRating(form, "transparency"),
      scrutability: readRating(form, "scrutability"),
      free_text: freeText.value,
    })
      .then(() => {
        status.textContent = "Thanks, feedback recorded.";
        status.className = "feedback-status ok";
        if (onDone) {
          onDone();
        }
      })
      .catch((err) => {
        status.textContent = err instanceof ApiError ? err.message : "could not send feedback";
        status.className = "feedback-status error";
        submit.disabled = false;
      });
  });

  return form;
}
