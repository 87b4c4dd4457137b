// Sign-in and registration pages.

import { ApiError, login, register } from "./api.js";
import { clear, el } from "./markup.js";
import { saveSession } from "./session.js";

function field(labelText: string, type: string): { wrap: HTMLElement; input: HTMLInputElement } {
  const wrap = el("label", "form-field");
  wrap.appendChild(el("span", "", labelText));
  const input = el("input") as HTMLInputElement;
  input.type = type;
  wrap.appendChild(input);
  return { wrap, input };
}

export function renderLogin(root: HTMLElement, onSignedIn: () => void): void {
  clear(root);
  const form = el("form", "auth-form") as HTMLFormElement;
  form.appendChild(el("h2", "", "Sign in"));
  const email = field("Email", "email");
  const password = field("Password", "password");
  form.appendChild(email.wrap);
  form.appendChild(password.wrap);
  const submit = el("button", "", "Sign in") as HTMLButtonElement;
  submit.type = "submit";
  form.appendChild(submit);
  const status = el("p", "auth-status");
  form.appendChild(status);

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    submit.disabled = true;
    login(email.input.value.trim(), password.input.value)
      .then((session) => {
        saveSession(session.session_token, session.user_id);
        onSignedIn();
      })
      .catch((err) => {
        status.textContent = err instanceof ApiError ? err.message : "sign in failed";
        submit.disabled = false;
      });
  });

  const toSignup = el("p", "auth-switch");
  const link = el("a", "", "Need an account? Register here.") as HTMLAnchorElement;
  link.href = "#/signup";
  toSignup.appendChild(link);
  root.appendChild(form);
  root.appendChild(toSignup);
}

export function renderSignup(root: HTMLElement, onSignedIn: () => void): void {
  clear(root);
  const form = el("form", "auth-form") as HTMLFormElement;
  form.appendChild(el("h2", "", "Create your account"));
  const name = field("Name", "text");
  const email = field("Email", "email");
  const password = field("Password (8+ characters)", "password");
  const topics = field("Topics you follow (comma separated)", "text");
  form.appendChild(name.wrap);
  form.appendChild(email.wrap);
  form.appendChild(password.wrap);
  form.appendChild(topics.wrap);
  const submit = el("button", "", "Register") as HTMLButtonElement;
  submit.type = "submit";
  form.appendChild(submit);
  const status = el("p", "auth-status");
  form.appendChild(status);

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    submit.disabled = true;
    const topicList = topics.input.value
      .split(",")
      .map((t) => t.trim())
      .filter((t) => t.length > 0);
    const emailValue = email.input.value.trim();
    const passwordValue = password.input.value;
    register(emailValue, passwordValue, name.input.value.trim(), topicList)
      .then(() => login(emailValue, passwordValue))
      .then((session) => {
        saveSession(session.session_token, session.user_id);
        onSignedIn();
      })
      .catch((err) => {
        status.textContent = err instanceof ApiError ? err.message : "registration failed";
        submit.disabled = false;
      });
  });

  const toLogin = el("p", "auth-switch");
  const link = el("a", "", "Already registered? Sign in.") as HTMLAnchorElement;
  link.href = "#/login";
  toLogin.appendChild(link);
  root.appendChild(form);
  root.appendChild(toLogin);
}
